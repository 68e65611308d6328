"""Rates are carried in nats/sample internally; bits appear only at the edges."""

import math

LN2 = math.log(2.0)
# 0.5*log2(2*pi*e/12): space-filling loss of a scalar uniform quantizer
SPACE_FILLING_LOSS_BITS = 0.5 * math.log2(2.0 * math.pi * math.e / 12.0)


def to_bits(nats):
    return nats / LN2


def to_nats(bits):
    return bits * LN2


def convert(nats, units):
    if units == "nats":
        return nats
    if units == "bits":
        return to_bits(nats)
    raise ValueError(f"unknown units {units!r}")
