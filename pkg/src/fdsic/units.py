"""Decibel/linear conversions.

All signal powers are tracked internally in linear milliwatt (referenced to
1 mW = 0 dBm); dB and dBm appear only at I/O boundaries.
"""

from __future__ import annotations

import numpy as np


def db_to_lin(db):
    """dB ratio -> linear power ratio."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0) if np.ndim(db) else 10.0 ** (db / 10.0)


def lin_to_db(x):
    """Linear power ratio -> dB."""
    return 10.0 * np.log10(x)


def dbm_to_mw(dbm):
    """Power in dBm -> linear mW."""
    return db_to_lin(dbm)


def mw_to_dbm(mw):
    """Linear mW -> dBm."""
    return lin_to_db(mw)
