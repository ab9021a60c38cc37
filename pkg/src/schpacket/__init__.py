"""Gaussian wave-packet dynamics under a logarithmic-friction Schroedinger equation."""
