"""
Unit tests for convlim.
"""
