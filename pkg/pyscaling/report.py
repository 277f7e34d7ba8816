#!/usr/bin/env python
#
# Copyright (c) 2025 The pyscaling authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""Rendering of cost and verification reports.

The ``table`` format is a rich table with counts in scientific notation at
three significant digits; ``json`` keeps counts as exact integers under a
fixed key set; ``csv`` writes one ``quantity,value`` row per field.
"""

from __future__ import annotations

import csv
import io
import json

from rich.table import Table

from pyscaling.config import FORMAT_CSV, FORMAT_JSON, FORMAT_TABLE, FORMATS
from pyscaling.exception import ConfigError

LABELS = {
    "parameters": "Parameters",
    "activations_memory": "Activations memory (elements)",
    "kv_cache_memory": "KV cache memory (elements)",
    "attention_memory": "Naive attention memory (elements)",
    "forward_flops": "Forward flops (n tokens)",
    "incremental_flops": "Incremental flops / token",
    "chinchilla_tokens": "Optimal training tokens",
    "training_flops": "Training flops",
    "gpu_years": "GPU-years",
    "gpu_hours": "GPU-hours",
    "dollars": "Training cost ($)",
    "price_per_mtok": "Inference $ / 1M tokens",
    "activations_memory_bytes": "Activations memory (bytes)",
    "kv_cache_memory_bytes": "KV cache memory (bytes)",
    "attention_memory_bytes": "Naive attention memory (bytes)"
}


def format_value(value):
    if isinstance(value, int):
        return "%.2e" % value
    return "%.3g" % value


def _check_format(fmt):
    if fmt not in FORMATS:
        raise ConfigError.unknown_format(fmt, FORMATS)


def _csv(rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def cost_fields(report, price_per_mtok=None, bytes_per_element=None):
    """Returns the ordered quantities of a cost report plus the optional extras."""
    fields = report.as_dict()
    if price_per_mtok is not None:
        fields["price_per_mtok"] = price_per_mtok
    if bytes_per_element is not None:
        fields.update(report.memory_bytes(bytes_per_element))
    return fields


def render_cost(report, cfg, fmt=FORMAT_TABLE, title=None, price_per_mtok=None, bytes_per_element=None):
    """Renders a cost report.

    :param report: cost report
    :param cfg: the configuration it describes (echoed in every format)
    :param fmt: ``table``, ``json`` or ``csv``
    :param title: table title
    :param price_per_mtok: inference price to append, or `None`
    :param bytes_per_element: add byte views of the memories, or `None`
    :return: a rich table for ``table``, otherwise a string
    """
    _check_format(fmt)
    fields = cost_fields(report, price_per_mtok, bytes_per_element)

    if fmt == FORMAT_JSON:
        return json.dumps(dict(config=cfg.as_dict(), **fields), indent=2)
    if fmt == FORMAT_CSV:
        config_rows = [(key, value) for key, value in cfg.as_dict().items()]
        return _csv([("quantity", "value")] + config_rows + list(fields.items()))

    table = Table(title=title or "Cost estimate (n=%d V=%d d=%d H=%d L=%d)" % (
        cfg.n, cfg.vocab, cfg.d_emb, cfg.heads, cfg.layers))
    table.add_column("Quantity", style="cyan", no_wrap=True)
    table.add_column("Value", style="magenta", justify="right")
    for name, value in fields.items():
        table.add_row(LABELS.get(name, name), format_value(value))
    return table


def render_verification(report, fmt=FORMAT_TABLE):
    """Renders a verification report as check / measured / expected / status rows."""
    _check_format(fmt)
    checks = report.get_checks()

    if fmt == FORMAT_JSON:
        return json.dumps({
            "config": report.get_config().as_dict(),
            "passed": report.passed(),
            "checks": [c._asdict() for c in checks]
        }, indent=2)
    if fmt == FORMAT_CSV:
        return _csv([("check", "measured", "expected", "status")] + [tuple(c) for c in checks])

    table = Table(title="Ledger verification")
    table.add_column("Check", style="cyan", no_wrap=True)
    table.add_column("Measured", justify="right")
    table.add_column("Expected", justify="right")
    table.add_column("Status")
    failures = report.failures()
    for check in checks:
        style = "red" if check in failures else "green"
        table.add_row(check.name, str(check.measured), str(check.expected), "[%s]%s[/%s]" % (
            style, check.status, style))
    return table
