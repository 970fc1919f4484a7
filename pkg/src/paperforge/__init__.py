"""Semi-automated reproduction of research systems as executable code.

The pipeline ingests a pre-converted paper bundle, extracts the system
description and a module division, scaffolds each module from a
structured reasoning chain, fills function bodies from semantic
data-flow/control-flow chains, and repairs failures in bounded
classify-prompt-patch loops, with every prompt and response persisted to
replayable transcripts.
"""

__version__ = "0.1.0"
