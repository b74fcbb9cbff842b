"""Testing framework for convlim."""
