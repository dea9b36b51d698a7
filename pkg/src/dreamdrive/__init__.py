"""Drive by imagination: a next-frame generator, a key-press classifier,
and a safe-depth game-tree planner, trained on a built-in toy road simulator.
"""

__version__ = "0.1.0"
