"""cribwatch: crib action recognition, training, and safety alerting."""

__version__ = "0.1.0"
