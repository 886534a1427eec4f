"""Massive MIMO link-level simulation: channels, capacity, precoding,
multicell pilot contamination and uplink detection."""

__version__ = "0.1.0"

from . import capacity, channel, detection, errors, multicell, numerics, precoding, rng  # noqa: E402

__all__ = ['capacity', 'channel', 'detection', 'errors', 'multicell', 'numerics',
           'precoding', 'rng', '__version__']
