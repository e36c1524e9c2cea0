"""Compressed oblivious encodings and secure search over additively
homomorphic ciphertexts."""

from .backend import (Backend, BackendKeys, BackendParams, Ciphertext, LatticeBackend, OpCounter,
                      PlaintextBackend, keygen)
from .bfscode import BfsCodeParams, attach_checksum, bfscode_decode, bfscode_encode
from .coie import CoieParams, bfcoie_decode, bfcoie_encode, level_index, warmup_decode, warmup_encode
from .field import DEFAULT_PRIME, FieldElement, PrimeModulus, PrimePolynomial, find_roots, newton_to_monic
from .pscoie import pscoie_decode, pscoie_encode

__version__ = "0.1.0"

__all__ = [
    "Backend", "BackendKeys", "BackendParams", "BfsCodeParams", "Ciphertext", "CoieParams", "DEFAULT_PRIME",
    "FieldElement", "LatticeBackend", "OpCounter", "PlaintextBackend", "PrimeModulus", "PrimePolynomial",
    "attach_checksum", "bfcoie_decode", "bfcoie_encode", "bfscode_decode", "bfscode_encode", "find_roots",
    "keygen", "level_index", "newton_to_monic", "pscoie_decode", "pscoie_encode", "warmup_decode",
    "warmup_encode",
]
