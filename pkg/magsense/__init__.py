"""
Simulation, estimation, feedback control and precision bounds for a
continuously monitored atomic magnetometer.
"""

__version__ = '0.1.0'

from magsense import bounds
from magsense import cog
from magsense import control
from magsense import engine
from magsense import filters
from magsense import sme
from magsense import spin
from magsense import stochastic
from magsense import units
