"""evisynth: clinical evidence synthesis engine.

Typed library + HTTP service + CLI covering the four stages of a
systematic literature review: study search, eligibility screening,
data extraction, and statistical synthesis. All LLM traffic goes
through an auditable gateway with a deterministic mock provider.
"""

from __future__ import annotations

__version__ = "0.1.0"
