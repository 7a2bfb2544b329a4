"""relayfield: outage analysis of a relay link inside a Poisson field of interferers."""

__version__ = "0.1.0"
