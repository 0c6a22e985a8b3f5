import hashlib
import json
import logging
import math
from fractions import Fraction

import click


def get_log_file_handler(log_file):
    formatter = logging.Formatter \
        ('%(asctime)s:%(msecs)03d %(name)-27s %(levelname)-8s %(message)s',
         datefmt='%d-%m-%y %H:%M:%S')

    fh = logging.FileHandler(log_file, mode='w')
    fh.setLevel(logging.DEBUG)
    fh.setFormatter(formatter)
    return fh


def get_log_console_handler():
    ch = logging.StreamHandler()
    ch.setLevel(logging.INFO)
    ch.setFormatter(
        logging.Formatter('%(name)-12s: %(levelname)-8s %(message)s'))
    return ch


def initialize_logger(log_level, log_file=None):
    """Set the root *log_level* and install the console handler plus, if
    *log_file* is given, a debug file handler."""
    root = logging.getLogger('')
    root.setLevel(getattr(logging, log_level.upper()))
    if log_file:
        root.addHandler(get_log_file_handler(log_file))
    root.addHandler(get_log_console_handler())


def stable_seed(*parts):
    """Return a 63 bit seed derived from *parts*.

    The parts are joined by ``'|'`` after ``repr()`` and hashed with
    BLAKE2b (8 byte digest).  Unlike :func:`hash`, the result does not
    depend on the interpreter's hash randomization, so the same parts give
    the same seed on every run and platform.

    """
    key = '|'.join(repr(p) for p in parts).encode('utf-8')
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, 'little') >> 1


def config_hash(data):
    """SHA-256 hex digest of the canonical JSON form of *data*."""
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def round_fraction(fraction, n):
    """Return ``fraction * n`` rounded to the nearest integer, halves going
    up, without binary floating point error, e.g.
    ``round_fraction(0.7, 45) == 32``.
    """
    return math.floor(Fraction(str(fraction)) * n + Fraction(1, 2))


def ceil_fraction(fraction, n):
    """Return ``ceil(fraction * n)`` without binary floating point error,
    e.g. ``ceil_fraction(0.25, 8) == 2`` and ``ceil_fraction(1.3, 10) == 13``.
    """
    return math.ceil(Fraction(str(fraction)) * n)


def format_fraction(value):
    """Short, stable text form of a fraction (``0.25``, ``1``)."""
    return '%g' % value


def validate_float_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError as e:
        raise click.BadParameter(e)


def validate_int_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError as e:
        raise click.BadParameter(e)


def validate_str_list(ctx, param, value):
    if value is None:
        return None
    return [v.strip() for v in value.split(',') if v.strip()]
