"""Passive gas-source localization with a 24-node sensor grid.

Simulates a Gaussian-puff channel, converts concentrations to sensor
voltages, detects arrivals, and inverts the puff model for the source
position (SNCLA).
"""

__version__ = "0.1.0"
