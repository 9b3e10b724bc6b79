"""rbelab: a desk-scale statevector lab for random-basis encryption of
classical bits, weak-measurement attacks on key distribution protocols, and
entanglement-locking experiments, with every closed-form claim checked by
exact amplitude computation and seeded Monte Carlo."""

__version__ = "0.1.0"

from . import entangle, protocols, qcore, rbe, weakmeas
from .qcore import StateVector, Unitary, basis_from_angles
from .rbe import Ciphertext, KeySpace, RbeKey, dec, enc, gen

__all__ = [
    "Ciphertext",
    "KeySpace",
    "RbeKey",
    "StateVector",
    "Unitary",
    "__version__",
    "basis_from_angles",
    "dec",
    "enc",
    "entangle",
    "gen",
    "protocols",
    "qcore",
    "rbe",
    "weakmeas",
]
