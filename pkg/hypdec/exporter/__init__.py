"""
Writers and readers for the artefacts produced by experiment runs.
"""
