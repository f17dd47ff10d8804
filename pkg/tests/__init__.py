"""Test package for sparsechoice.

Ensures Python imports the repository-local `tests` package instead of any
similarly named third-party distribution installed in the environment.
"""
