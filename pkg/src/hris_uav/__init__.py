"""Hybrid active-passive RIS-assisted UAV downlink: models, SCA optimizers, oracles."""
