"""Horocycle flows on compact quotients of PSL(2,R)."""

__version__ = "0.1.0"
