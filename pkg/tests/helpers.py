"""Scripted chat-completion providers used across pipeline and CLI tests.

The reference provider plays the role of a competent code generator: it
answers the numeric-extraction prompt by lifting the JSON payload out of the
problem text, answers both L2 extraction prompts with fixed candidate lists,
and answers every generation/repair prompt with a candidate program backed
by the package's own model builder (optionally with mutations dropped, to
fake defective candidates).
"""

from __future__ import annotations

import json
import re

from optverify.reference import candidate_source

_JSON_FENCE = re.compile(r"```json\s*\n(.*?)```", re.DOTALL)

CPT_CANDIDATES = [
    {"description": "cold storage capacity limit", "type": "capacity",
     "parameters": ["cold_capacity"]},
]
OPT_CANDIDATES = [
    {"description": "unit purchasing cost", "role": "cost",
     "parameters": ["purchasing"]},
]


def scripted_reference_provider(drop=(), cpt_candidates=None, opt_candidates=None):
    code = candidate_source(drop=drop)

    def fn(payload: dict) -> str:
        user = payload["user"]
        if "Extract all numerical parameters" in user:
            m = _JSON_FENCE.search(user)
            if m:
                return m.group(1)
            return "no data found"
        if "KEY CONSTRAINTS" in user:
            return json.dumps(cpt_candidates if cpt_candidates is not None
                              else CPT_CANDIDATES)
        if "KEY OBJECTIVE" in user:
            return json.dumps(opt_candidates if opt_candidates is not None
                              else OPT_CANDIDATES)
        return f"```python\n{code}\n```"

    return fn
