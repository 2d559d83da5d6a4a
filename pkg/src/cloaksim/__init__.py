"""Numerical laboratory for cloaking by complementary media in the quasistatic regime."""

__version__ = "0.1.0"
