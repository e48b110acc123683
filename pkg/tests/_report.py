"""Collects the one-line criterion verdicts printed at the end of a run."""

LINES: list[str] = []


def report(label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line, flush=True)
    return ok


def info(label, detail):
    line = f"{label}: INFO  {detail}"
    LINES.append(line)
    print(line, flush=True)


def extended_enabled():
    import os

    return os.environ.get("ESSP_SKIP_EXTENDED", "").strip().lower() not in ("1", "true", "yes")
