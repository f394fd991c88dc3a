#!/usr/bin/env python3

############################################################################
#                                                                          #
#  GradFlow - Gradient flow maximal function toolkit                       #
#  Copyright (C) 2026  GradFlow developers                                 #
#                                                                          #
#  This program is free software: you can redistribute it and/or modify    #
#  it under the terms of the GNU General Public License as published by    #
#  the Free Software Foundation, either version 3 of the License, or       #
#  (at your option) any later version.                                     #
#                                                                          #
#  This program is distributed in the hope that it will be useful,         #
#  but WITHOUT ANY WARRANTY; without even the implied warranty of          #
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the           #
#  GNU General Public License for more details.                            #
#                                                                          #
#  You should have received a copy of the GNU General Public License       #
#  along with this program.  If not, see <https://www.gnu.org/licenses/>.  #
#                                                                          #
############################################################################


import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field

import loguru

logger = loguru.logger.bind(stage="report")


@dataclass(frozen=True)
class CheckReport:
    """ Outcome of a single discrete property check """

    name: str
    passed: bool
    value: float = float("nan")
    details: dict = field(default_factory=dict)
    cause: str = ""

    def row(self):
        return {"check": self.name, "passed": self.passed, "margin": self.value, "cause": self.cause}

    @classmethod
    def failure(cls, name, error):
        """ FAIL row carrying the error that stopped the check """

        return cls(name, False, float("nan"), {}, f"{type(error).__name__}: {error}")


def format_value(value):
    """ Deterministic text form of a CSV / JSON scalar """

    if value is None:
        return ""

    if isinstance(value, bool):
        return "true" if value else "false"

    if isinstance(value, float):
        return repr(value)

    return str(value)


def atomic_write(path, text):
    """ Write file through a temporary sibling and rename it into place """

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=directory, prefix=".gradflow-", suffix=".tmp")

    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
        os.replace(temporary, path)

    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise

    logger.opt(depth=1).debug(f"Wrote {path}")


def csv_text(fieldnames, rows):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(row.get(key)) for key in fieldnames})
    return buffer.getvalue()


def write_csv(path, fieldnames, rows):
    atomic_write(path, csv_text(fieldnames, rows))


def write_json(path, payload):
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
