"""Double-quoted YAML scalars that any YAML 1.1 reader loads back verbatim."""

import json
import re

# JSON escapes C0 controls already; YAML additionally rejects DEL, C1
# controls, surrogates and the two non-characters at the end of the BMP.
_UNPRINTABLE = re.compile("[\x7f-\x9f\ud800-\udfff￾￿]")


def yaml_quote(text: str) -> str:
    quoted = json.dumps(text, ensure_ascii=False)
    return _UNPRINTABLE.sub(lambda m: f"\\u{ord(m.group()):04x}", quoted)
