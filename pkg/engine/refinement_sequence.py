"""
Bit-packed left/right paths through a binary refinement tree.

Bit i of ``bits`` describes the i-th descent: 0 for the left child, 1 for
the right child (least significant bit first). The length is capped at 64
so that every sequence fits a 64-bit key.
"""
from dataclasses import dataclass

# --- Configuration ---
MAX_SEQUENCE_LENGTH = 64
LEFT = 0
RIGHT = 1
_STEP_NAMES = {"L": LEFT, "R": RIGHT, LEFT: LEFT, RIGHT: RIGHT}


class SequenceOverflowError(OverflowError):
    """Raised when a sequence would grow beyond MAX_SEQUENCE_LENGTH steps."""


def as_step(step):
    """
    Normalizes 'L'/'R' or 0/1 into LEFT/RIGHT.

    :param step: A step given as 'L', 'R', 0 or 1.
    :return: LEFT or RIGHT.
    """
    try:
        return _STEP_NAMES[step]
    except (KeyError, TypeError):
        raise ValueError(f"Unknown refinement step {step!r}, expected 'L' or 'R'") from None


@dataclass(frozen=True)
class RefinementSequence:
    """An immutable L/R path, usable directly as a dictionary key."""
    bits: int = 0
    length: int = 0

    def __post_init__(self):
        if not 0 <= self.length <= MAX_SEQUENCE_LENGTH:
            raise SequenceOverflowError(
                f"Sequence length {self.length} outside [0, {MAX_SEQUENCE_LENGTH}]")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError(f"Bits {self.bits:#x} set above position {self.length - 1}")

    @classmethod
    def from_steps(cls, steps):
        """
        Builds a sequence from an iterable of steps ('L'/'R' or 0/1).

        :param steps: The steps, first descent first.
        :return: A RefinementSequence.
        """
        seq = cls()
        for step in steps:
            seq = seq.append(step)
        return seq

    def append(self, step):
        if self.length >= MAX_SEQUENCE_LENGTH:
            raise SequenceOverflowError(
                f"Cannot append to a sequence of length {MAX_SEQUENCE_LENGTH}")
        return RefinementSequence(self.bits | (as_step(step) << self.length), self.length + 1)

    def concat(self, other):
        if self.length + other.length > MAX_SEQUENCE_LENGTH:
            raise SequenceOverflowError(
                f"Concatenation would reach length {self.length + other.length}")
        return RefinementSequence(self.bits | (other.bits << self.length),
                                  self.length + other.length)

    def prefix(self, length):
        """The first ``length`` steps."""
        return RefinementSequence(self.bits & ((1 << length) - 1), length)

    def suffix(self, start):
        """The steps from position ``start`` onwards."""
        return RefinementSequence(self.bits >> start, self.length - start)

    def step(self, i):
        return (self.bits >> i) & 1

    def steps(self):
        return tuple(self.step(i) for i in range(self.length))

    @property
    def key(self):
        return (self.bits, self.length)

    def __len__(self):
        return self.length

    def __str__(self):
        return "".join("R" if s else "L" for s in self.steps()) or "()"


EMPTY_SEQUENCE = RefinementSequence()


def sequence_append(sequence, step):
    """
    Returns ``sequence`` with ``step`` appended at position ``sequence.length``.

    :param sequence: A RefinementSequence.
    :param step: 'L', 'R', LEFT or RIGHT.
    :return: The extended sequence.
    """
    return sequence.append(step)
