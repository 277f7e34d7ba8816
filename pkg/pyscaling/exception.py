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

from __future__ import annotations


class ScalingError(Exception):
    pass


class ShapeError(ScalingError):
    @classmethod
    def mismatch(cls, operation, left_shape, right_shape):
        return cls("Cannot %s matrices of shapes %dx%d and %dx%d." % ((operation, ) + tuple(left_shape) +
                                                                      tuple(right_shape)))

    @classmethod
    def empty(cls, rows, cols):
        return cls("Matrix must have at least one row and one column, got %dx%d." % (rows, cols))

    @classmethod
    def not_congruent(cls, name, expected, actual):
        return cls("Shape of '%s' is %dx%d, expected %dx%d." % ((name, ) + tuple(actual) + tuple(expected)))


class ConfigError(ScalingError):
    @classmethod
    def invalid_value(cls, name, value, requirement):
        return cls("Invalid value '%s' for '%s': %s." % (value, name, requirement))

    @classmethod
    def heads_do_not_divide(cls, d_emb, heads):
        return cls("Embedding dimension %d is not divisible by head count %d." % (d_emb, heads))

    @classmethod
    def unknown_preset(cls, preset, known_presets):
        return cls(
            "The given preset '%s' is unknown, pyscaling currently knows only the following presets: %s." %
            (preset, ", ".join(sorted(known_presets))))

    @classmethod
    def unknown_scenario(cls, scenario, known_scenarios):
        return cls("The given scenario '%s' is unknown, known scenarios: %s." %
                   (scenario, ", ".join(sorted(known_scenarios))))

    @classmethod
    def malformed_line(cls, path, line_number, line):
        return cls("Malformed line %d in '%s': %r." % (line_number, path, line))

    @classmethod
    def unknown_key(cls, path, line_number, key, known_keys):
        return cls("Unknown key '%s' on line %d in '%s', expected one of: %s." %
                   (key, line_number, path, ", ".join(sorted(known_keys))))

    @classmethod
    def missing_keys(cls, path, keys):
        return cls("Config file '%s' does not define: %s." % (path, ", ".join(sorted(keys))))

    @classmethod
    def unreadable(cls, path, exception):
        return cls("Cannot read config file '%s': %s." % (path, exception))

    @classmethod
    def conflicting_sources(cls):
        return cls("Exactly one of a preset or a config file must be given.")

    @classmethod
    def unknown_format(cls, fmt, known_formats):
        return cls("Unknown output format '%s', expected one of: %s." % (fmt, ", ".join(known_formats)))


class VocabularyError(ScalingError):
    @classmethod
    def out_of_range(cls, token_id, vocab_size):
        return cls("Token id %d is outside the vocabulary range [0, %d)." % (token_id, vocab_size))

    @classmethod
    def unknown_character(cls, char):
        return cls("Character %r is not part of the vocabulary." % char)


class WindowFullError(ScalingError):
    @classmethod
    def overflow(cls, requested, window):
        return cls("Sequence of %d tokens does not fit the context window of %d tokens." % (requested, window))


class NumericError(ScalingError):
    @classmethod
    def fully_masked_row(cls, row):
        return cls("Row %d is fully masked, softmax is undefined." % row)

    @classmethod
    def non_finite(cls, what):
        return cls("Non-finite values encountered in %s." % what)


class SequenceError(ScalingError):
    @classmethod
    def too_short(cls, length, required):
        return cls("Sequence of length %d is too short, at least %d tokens are required." % (length, required))

    @classmethod
    def empty(cls):
        return cls("Token sequence must contain at least one token.")


class CorpusError(ScalingError):
    @classmethod
    def empty(cls, path):
        return cls("Corpus '%s' is empty." % path)

    @classmethod
    def unreadable(cls, path, exception):
        return cls("Cannot read corpus '%s': %s." % (path, exception))


class CheckpointError(ScalingError):
    @classmethod
    def bad_magic(cls, path):
        return cls("File '%s' is not a pyscaling checkpoint." % path)

    @classmethod
    def unsupported_version(cls, path, version):
        return cls("Checkpoint '%s' has unsupported format version %d." % (path, version))

    @classmethod
    def truncated(cls, path):
        return cls("Checkpoint '%s' is truncated." % path)

    @classmethod
    def corrupt(cls, path, reason):
        return cls("Checkpoint '%s' is corrupt: %s." % (path, str(reason).rstrip(".")))


class GuardError(ScalingError):
    @classmethod
    def too_large(cls, flops, limit):
        return cls("Configuration needs %.3e forward flops, desk verification is limited to %.3e." % (flops, limit))


class ScalingWarning(Warning):
    pass


class VocabularyCapWarning(ScalingWarning):
    pass
