"""Total positivity charts, their transition maps, and Monte Carlo checks of
the beta-gamma and exit-law identities they induce."""

__version__ = "0.1.0"
