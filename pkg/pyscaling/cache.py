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

import functools

try:
    from pylru import lrucache
    _cache = lrucache(256)
except ImportError:
    _cache = {}


def cached(func):
    """Memoizes a pure function of hashable arguments.

    Passing ``_cache=False`` bypasses and refreshes the stored entry.
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        refresh = not kwargs.pop("_cache", True)
        key = (func, args, tuple(sorted(kwargs.items())))

        if refresh:
            try:
                del _cache[key]
            except KeyError:
                pass
        else:
            try:
                return _cache[key]
            except KeyError:
                pass

        result = func(*args, **kwargs)
        _cache[key] = result
        return result
    return wrapper


def clear():
    _cache.clear()
