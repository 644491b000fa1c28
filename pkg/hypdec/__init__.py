"""
Numerical laboratory for Fourier extension, decoupling and incidence estimates on the hyperbolic paraboloid.
"""
