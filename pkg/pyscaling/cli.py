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

"""Command-line interface: ``estimate``, ``verify``, ``train`` and ``generate``.

Exit codes: 0 success, 1 failed verification, 2 usage or configuration
error, 3 configuration too large for desk verification.
"""

from __future__ import annotations

import logging

from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import typer

from rich.console import Console

from pyscaling import checkpoint, cost
from pyscaling.config import FORMAT_TABLE, RunConfig, TrainingConfig, default_hardware_profile
from pyscaling.decoder import generate as generate_tokens
from pyscaling.decoder import generate_reference
from pyscaling.exception import ConfigError, GuardError, ScalingError
from pyscaling.log import get_default_logger
from pyscaling.model import init_params
from pyscaling.presets import get_scenario, scenario_report, use_case_report
from pyscaling.report import render_cost, render_verification
from pyscaling.training import DEMO_CONFIG, CharVocabulary, load_corpus, train_demo
from pyscaling.verify import SMALL_CONFIG, run_verification, sweep_heads

EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_GUARD = 3

console = Console()
app = typer.Typer(help="Scaling-law toolkit for decoder-only transformers.", no_args_is_help=True)


@contextmanager
def _exit_codes():
    try:
        yield
    except GuardError as ex:
        typer.echo("Error: %s" % ex, err=True)
        raise typer.Exit(EXIT_GUARD)
    except ScalingError as ex:
        typer.echo("Error: %s" % ex, err=True)
        raise typer.Exit(EXIT_USAGE)


def _emit(rendered):
    if isinstance(rendered, str):
        typer.echo(rendered)
    else:
        console.print(rendered)


def _hardware(gpu_flops, gpu_cost, seconds_per_year):
    return default_hardware_profile().replace(flops=gpu_flops, cost_per_year=gpu_cost,
                                              seconds_per_year=seconds_per_year)


def _heads(value):
    try:
        heads = [int(h) for h in value.split(",") if h.strip()]
    except ValueError:
        raise ConfigError.invalid_value("heads", value, "must be a comma-separated list of integers")
    if not heads:
        raise ConfigError.invalid_value("heads", value, "must name at least one head count")
    return heads


@app.callback()
def main_callback(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level.")):
    get_default_logger(logging.DEBUG if verbose else logging.WARNING)


@app.command()
def estimate(
        preset: Optional[str] = typer.Option(None, "--preset", "-p", help="Named use case (A, B, C, D-low, ...)."),
        config: Optional[Path] = typer.Option(None, "--config", "-c", help="key=value model config file."),
        moe: Optional[str] = typer.Option(None, "--moe", help="Mixture-of-experts scenario (deepseek)."),
        output_format: str = typer.Option(FORMAT_TABLE, "--format", "-f", help="table, json or csv."),
        gpu_flops: Optional[float] = typer.Option(None, "--gpu-flops", help="Device throughput, flop/s."),
        gpu_cost: Optional[float] = typer.Option(None, "--gpu-cost", help="Device cost per year, $."),
        seconds_per_year: Optional[float] = typer.Option(None, "--seconds-per-year"),
        include_vocab: bool = typer.Option(False, "--include-vocab", help="Keep V terms in training flops."),
        bytes_per_element: Optional[int] = typer.Option(None, "--bytes-per-element", help="Add byte memories.")):
    """Closed-form memory, flops, training data and cost of a configuration."""
    with _exit_codes():
        hw = _hardware(gpu_flops, gpu_cost, seconds_per_year)
        if moe is not None:
            if preset is not None or config is not None:
                raise ConfigError.conflicting_sources()
            cfg = get_scenario(moe).active_inference
            report = scenario_report(moe, hw, include_vocab)
            title = "Mixture-of-experts scenario '%s'" % moe
        else:
            run = RunConfig("estimate", preset=preset, config_path=config, hardware=hw, output_format=output_format)
            cfg = run.resolve_model_config()
            report = use_case_report(preset, hw, include_vocab) if preset is not None else cost.cost_report(
                cfg, hw, include_vocab)
            title = "Use case '%s'" % preset if preset is not None else None
        price = cost.incremental_price_per_mtok(cfg, hw)
        _emit(render_cost(report, cfg, output_format, title, price, bytes_per_element))


@app.command()
def verify(
        preset: Optional[str] = typer.Option(None, "--preset", "-p"),
        config: Optional[Path] = typer.Option(None, "--config", "-c", help="key=value model config file."),
        heads: Optional[str] = typer.Option(None, "--heads", help="Comma-separated head counts to sweep."),
        seed: int = typer.Option(0, "--seed"),
        gradients: bool = typer.Option(True, "--gradients/--no-gradients", help="Run the gradient check."),
        output_format: str = typer.Option(FORMAT_TABLE, "--format", "-f"),
        expect_offset: int = typer.Option(0, "--expect-offset", hidden=True)):
    """Runs the instrumented model and compares its ledger with the closed forms."""
    with _exit_codes():
        run = RunConfig("verify", preset=preset, config_path=config, output_format=output_format, seed=seed)
        cfg = run.resolve_model_config(SMALL_CONFIG)
        report = run_verification(cfg, seed, expect_offset, gradients)
        if heads is not None:
            report.merge(sweep_heads(cfg, _heads(heads), seed))
        _emit(render_verification(report, output_format))
    if not report.passed():
        raise typer.Exit(EXIT_VERIFY_FAILED)


@app.command()
def train(
        corpus: Optional[Path] = typer.Option(None, "--corpus", help="UTF-8 text corpus (bundled demo by default)."),
        seed: int = typer.Option(0, "--seed"),
        steps: int = typer.Option(TrainingConfig.steps, "--steps"),
        batch_size: int = typer.Option(TrainingConfig.batch_size, "--batch-size"),
        learning_rate: float = typer.Option(TrainingConfig.learning_rate, "--learning-rate", "--lr"),
        config: Optional[Path] = typer.Option(None, "--config", "-c", help="Model config (demo model by default)."),
        save: Optional[Path] = typer.Option(None, "--save", help="Write a checkpoint here.")):
    """Trains the demo model with SGD, printing one loss per line and a summary."""
    with _exit_codes():
        cfg = RunConfig("train", config_path=config, corpus=corpus, seed=seed).resolve_model_config(DEMO_CONFIG)
        tcfg = TrainingConfig(learning_rate=learning_rate, steps=steps, batch_size=batch_size, seed=seed,
                              corpus=str(corpus) if corpus is not None else None)
        result = train_demo(cfg, tcfg)
        for loss in result.losses:
            typer.echo("%.6f" % loss)
        typer.echo("initial %.4f final %.4f ratio %.4f" % (
            result.losses[0], result.losses[-1], result.losses[-1] / result.losses[0]))
        if save is not None:
            checkpoint.dump(save, result.params, result.vocabulary)


def _encode(prompt, vocabulary):
    if vocabulary is not None:
        return vocabulary.encode(prompt)
    try:
        return [int(t) for t in prompt.split()]
    except ValueError:
        raise ConfigError.invalid_value("prompt", prompt, "must be space-separated token ids for this model")


def _decode(tokens, vocabulary):
    if vocabulary is None:
        return " ".join(str(t) for t in tokens)
    return vocabulary.decode(tokens)


@app.command()
def generate(
        prompt: str = typer.Option("row ", "--prompt", help="Prompt text (token ids when the model has no vocabulary)."),
        steps: Optional[int] = typer.Option(None, "--steps", help="Tokens to generate (fills the window by default)."),
        temperature: float = typer.Option(1.0, "--temperature"),
        seed: int = typer.Option(0, "--seed"),
        greedy: bool = typer.Option(False, "--greedy", help="Always pick the most likely token."),
        load: Optional[Path] = typer.Option(None, "--checkpoint", help="Trained checkpoint."),
        corpus: Optional[Path] = typer.Option(None, "--corpus", help="Vocabulary source for a fresh model."),
        check: bool = typer.Option(False, "--check", help="Compare with the uncached decoder.")):
    """Generates tokens after a prompt with the KV-cached decoder."""
    with _exit_codes():
        if load is not None:
            params, vocabulary = checkpoint.load(load)
        else:
            vocabulary = CharVocabulary.from_text(load_corpus(corpus), DEMO_CONFIG.vocab)
            params = init_params(DEMO_CONFIG.replace(vocab=len(vocabulary)), seed)

        tokens = _encode(prompt, vocabulary)
        if steps is None:
            steps = max(params.get_config().n - len(tokens), 0)
        elif steps < 0:
            raise ConfigError.invalid_value("steps", steps, "must not be negative")
        temperature = 0.0 if greedy else temperature
        output = generate_tokens(tokens, steps, temperature, seed, params)
        typer.echo(_decode(output, vocabulary))
        if check:
            matches = output == generate_reference(tokens, steps, temperature, seed, params)
            typer.echo("uncached decoder %s" % ("agrees" if matches else "DISAGREES"))
    if check and not matches:
        raise typer.Exit(EXIT_VERIFY_FAILED)


def main():
    app()
