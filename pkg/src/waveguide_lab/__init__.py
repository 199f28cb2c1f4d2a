"""Numerical laboratory for bilinear Strichartz estimates on waveguides."""
