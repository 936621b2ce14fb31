#!/usr/bin/env python3
"""Runs the Robolectric methods pinned to one SDK level through Gradle.

    gradle_robolectric_runner.py --project DIR --test-class FQCN --sdk LEVEL

Selects the methods of FQCN annotated with ``@Config(sdk = LEVEL)``, runs
them with ``./gradlew <task> --tests FQCN.method`` and reports the JUnit XML
outcome as one JSON document on stdout. Exit code 0/1/2 matches
passed/failed/error. A build that fails before any result is written counts
as a failed test, since the generated code is what broke it.

Environment: EVOLVE_GRADLE_TASK (default ``testDebugUnitTest``).
"""

import argparse
import json
import os
import re
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from pathlib import Path

EXIT = {"passed": 0, "failed": 1, "error": 2}
CONFIG_METHOD = re.compile(
    r"@Config\s*\(\s*sdk\s*=\s*(\d+)\s*\)(?:\s*@\w+(?:\([^)]*\))?)*\s*"
    r"(?:public\s+|protected\s+|private\s+)?void\s+(\w+)\s*\("
)
OUTPUT_TAIL = 4000


def report(status, failed_test=None, message=None, started=None):
    duration = int((time.monotonic() - started) * 1000) if started else 0
    doc = {"status": status, "failed_test": failed_test, "message": message, "duration_ms": duration}
    sys.stdout.write(json.dumps(doc) + "\n")
    sys.exit(EXIT[status])


def find_test_source(project, fqcn):
    rel = Path(*fqcn.split(".")).with_suffix(".java")
    for root, dirs, _ in os.walk(project):
        dirs[:] = [d for d in dirs if not d.startswith(".") and d != "build"]
        if root.endswith(os.path.join("src", "test", "java")):
            candidate = Path(root) / rel
            if candidate.is_file():
                return candidate
    return None


def pinned_methods(source, sdk):
    text = re.sub(r"//[^\n]*|/\*.*?\*/", " ", source, flags=re.S)
    return [name for level, name in CONFIG_METHOD.findall(text) if int(level) == sdk]


def result_files(project, fqcn):
    return [p for p in Path(project).rglob(f"TEST-{fqcn}.xml") if "test-results" in p.parts]


def first_failure(files, methods):
    ran = 0
    for path in files:
        try:
            tree = ET.parse(path)
        except ET.ParseError as e:
            return ran, (None, f"unreadable result file {path}: {e}")
        for case in tree.iter("testcase"):
            if case.get("name") not in methods:
                continue
            ran += 1
            for tag in ("failure", "error"):
                node = case.find(tag)
                if node is not None:
                    message = node.get("message") or (node.text or "").strip() or tag
                    return ran, (case.get("name"), message)
    return ran, None


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--project", required=True)
    parser.add_argument("--test-class", required=True)
    parser.add_argument("--sdk", required=True, type=int)
    try:
        args = parser.parse_args()
    except SystemExit:
        report("error", message="usage: --project DIR --test-class FQCN --sdk LEVEL")
    started = time.monotonic()

    project = Path(args.project)
    gradlew = project / "gradlew"
    if not os.access(gradlew, os.X_OK):
        report("error", message=f"{gradlew} is missing or not executable", started=started)
    source = find_test_source(project, args.test_class)
    if source is None:
        report("error", message=f"no test source for {args.test_class}", started=started)
    methods = pinned_methods(source.read_text(encoding="utf-8"), args.sdk)
    if not methods:
        report("error", message=f"{args.test_class} has no method pinned to sdk {args.sdk}", started=started)

    for stale in result_files(project, args.test_class):
        stale.unlink()
    task = os.environ.get("EVOLVE_GRADLE_TASK", "testDebugUnitTest")
    cmd = [str(gradlew.resolve()), task, "--console=plain"]
    for m in methods:
        cmd += ["--tests", f"{args.test_class}.{m}"]
    try:
        proc = subprocess.run(cmd, cwd=project, capture_output=True, text=True)
    except OSError as e:
        report("error", message=f"cannot start gradle: {e}", started=started)

    ran, failure = first_failure(result_files(project, args.test_class), set(methods))
    if failure is not None:
        name, message = failure
        if name is None:
            report("error", message=message, started=started)
        report("failed", failed_test=name, message=message, started=started)
    if ran == len(methods) and proc.returncode == 0:
        report("passed", started=started)
    output = (proc.stdout + proc.stderr)[-OUTPUT_TAIL:]
    if ran == 0 and proc.returncode != 0:
        # compilation or configuration failure before any test ran
        report("failed", failed_test=methods[0], message=output.strip() or "build failed", started=started)
    report("error", message=f"gradle exited {proc.returncode} after {ran} of {len(methods)} tests: {output}", started=started)


if __name__ == "__main__":
    main()
