"""
Integration tests for the convlim command line.
"""
