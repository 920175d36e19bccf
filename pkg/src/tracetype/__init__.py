"""tracetype: record execution traces of MiniDyn programs, ascribe and merge
types under configurable strategies, and count type-error locations."""

__version__ = "0.1.0"
