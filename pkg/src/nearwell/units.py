"""Boundary unit conversions; everything internal is SI."""

BAR = 1.0e5  # Pa
DAY = 86400.0  # s
TONNE = 1000.0  # kg
GRAVITY = 9.81  # m/s²


def bar(x):
    return x * BAR


def to_bar(p):
    return p / BAR


def days(x):
    return x * DAY


def to_days(t):
    return t / DAY


def tonne_per_day(x):
    """tonne/day -> kg/s."""
    return x * TONNE / DAY


def m3_per_day(x, rho_ref):
    """Volume rate at reference density -> kg/s."""
    return x * rho_ref / DAY
