"""Conversion helpers for external pair datasets."""
from __future__ import annotations

import json
from pathlib import Path


def import_cp_pairs(input_path: str | Path, output_path: str | Path) -> int:
    """Map CP-style records onto the pair schema.

    Accepts JSONL records carrying either {stereo_text, anti_text} or the
    common {sent_more, sent_less} field names; the more-stereotypical
    sentence becomes the stereo side. The dataset itself is not shipped.
    """
    n = 0
    with open(output_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(
            Path(input_path).read_text(encoding="utf-8").splitlines(), 1
        ):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "stereo_text" in rec:
                stereo, anti = rec["stereo_text"], rec["anti_text"]
            elif "sent_more" in rec:
                stereo, anti = rec["sent_more"], rec["sent_less"]
            else:
                raise ValueError(
                    f"{input_path}:{lineno}: need stereo_text/anti_text or "
                    f"sent_more/sent_less fields"
                )
            out.write(json.dumps({
                "stereo_text": stereo,
                "anti_text": anti,
                "direction": rec.get("direction", "stereo"),
            }, ensure_ascii=False) + "\n")
            n += 1
    return n
