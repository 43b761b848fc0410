"""IRS-assisted mmWave NOMA downlink: channels, SCA optimizer, baselines, campaigns."""

__version__ = "0.1.0"
