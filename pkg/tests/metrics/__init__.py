"""
Metrics framework for convlim verification runs.
"""
