"""
Helper classes supporting the estimators.
"""
