"""Pure-Python (gmpy2) implementation of the hot kernels.

The compiled module ``_ckernels`` exposes the same ``Branches`` class; this
one is the reference and the fallback when the extension is unavailable.
"""

from array import array
import math

import gmpy2
from gmpy2 import mpfr

BACKEND_NAME = "python"


def _double_root(c, gamma, x0):
    # Newton on x + x**(1+gamma) = c in double precision, from above.
    e = 1.0 + gamma
    x = x0
    for _ in range(60):
        h = x + x ** e - c
        step = h / (1.0 + e * x ** gamma)
        x_new = x - step
        if x_new <= 0.0:
            x_new = x / 2.0
        if abs(x_new - x) <= 1e-16 * x:
            x = x_new
            break
        x = x_new
    return x


class Branches:
    """Branch inverses and forward iterates of x -> x + x**(1+gamma) (mod 1)."""

    def __init__(self, gamma, prec):
        prec = int(prec)
        if prec < 64:
            raise ValueError("precision must be at least 64 bits")
        self.prec = prec
        with self._ctx():
            self.gamma = mpfr(gamma)
            if not self.gamma > 0:
                raise ValueError("gamma must be positive")
            self.expo = self.gamma + 1
        g = float(self.gamma)
        self._gf = g
        self._kind = "generic"
        if g == 1.0:
            self._kind = "one"
        elif g == int(g) and g <= 64:
            self._kind = "int"
            self._gi = int(g)
        elif 2 * g == int(2 * g) and g <= 64:
            self._kind = "half"
            self._gi = int(g - 0.5)
        with self._ctx():
            self.r1 = self.right_inv(mpfr(0))

    def _ctx(self):
        # fresh context each time: gmpy2 contexts are not re-entrant
        return gmpy2.context(precision=self.prec)

    # x**gamma, specialised to avoid the slow generic power
    def _powg(self, x):
        k = self._kind
        if k == "one":
            return x
        if k == "int":
            return x ** self._gi
        if k == "half":
            return x ** self._gi * gmpy2.sqrt(x)
        return x ** self.gamma

    def _solve(self, c, upper):
        # root of x + x**(1+gamma) = c below the upper bound; Newton from above
        with self._ctx():
            c = mpfr(c)
            if self._kind == "one":
                return 2 * c / (1 + gmpy2.sqrt(1 + 4 * c))
            x = None
            cf = float(c)
            if cf > 1e-280:
                g = _double_root(cf, self._gf, min(float(upper), cf))
                x = mpfr(g * (1.0 + 1e-12))
                if x > upper:
                    x = mpfr(upper)
                if x + x * self._powg(x) < c:
                    x = None
            staged = False
            if x is None:
                x = mpfr(upper)
            elif self.prec > 80:
                # the guess is good to ~40 bits: double the accuracy at growing precision
                guess, acc = x, 40
                while 2 * acc < self.prec:
                    with gmpy2.context(precision=2 * acc + 32):
                        pg = self._powg(x)
                        x = x - (x + x * pg - c) / (1 + self.expo * pg)
                    acc *= 2
                # nudge above the root so the final iteration descends from above
                x = mpfr(x) + gmpy2.mul_2exp(x, -(acc - 4))
                if x > upper:
                    x = mpfr(upper)
                staged = True
            i = 0
            while i < 200:
                pg = self._powg(x)
                h = x + x * pg - c
                if h <= 0:
                    if staged and i == 0 and h < 0:
                        # staging fell short: restart from the guess
                        x, staged = guess, False
                        continue
                    break
                x_new = x - h / (1 + self.expo * pg)
                if x_new >= x:
                    break
                x = x_new
                i += 1
            return x

    def left_inv(self, y):
        with self._ctx():
            y = mpfr(y)
            if y <= 0:
                return mpfr(0)
            return self._solve(y, y)

    def right_inv(self, y):
        with self._ctx():
            return self._solve(1 + mpfr(y), mpfr(1))

    def f(self, x):
        with self._ctx():
            x = mpfr(x)
            v = x + x * self._powg(x)
            return v - 1 if v >= 1 else v

    def forward(self, x, n):
        with self._ctx():
            x = mpfr(x)
            for _ in range(int(n)):
                v = x + x * self._powg(x)
                x = v - 1 if v >= 1 else v
            return x

    def forward_left(self, x, n):
        # n steps of the left branch only (no reduction mod 1)
        with self._ctx():
            x = mpfr(x)
            for _ in range(int(n)):
                x = x + x * self._powg(x)
            return x

    def deriv_product(self, x, n):
        """Return (product of f' along the first n points, f^n(x))."""
        with self._ctx():
            x = mpfr(x)
            prod = mpfr(1)
            for _ in range(int(n)):
                pg = self._powg(x)
                prod *= 1 + self.expo * pg
                v = x + x * pg
                x = v - 1 if v >= 1 else v
            return prod, x

    def chart_step(self, k, y):
        """Apply the branch of F with return time k to y, clamped to [r1, 1].

        Points right of the cell clamp to 1 and points left of it to r1, so
        the result stays monotone in y; used to seed child-index searches.
        """
        with self._ctx():
            y = mpfr(y)
            x = y + y * self._powg(y) - 1
            if x <= 0:
                return +self.r1
            for _ in range(int(k) - 1):
                x = x + x * self._powg(x)
                if x >= 1:
                    return mpfr(1)
            if x < self.r1:
                return +self.r1
            return x if x <= 1 else mpfr(1)

    def chart_step_d(self, k, y):
        """chart_step plus log2 of the derivative of the branch along the orbit."""
        e1 = self._gf + 1
        with self._ctx():
            y = mpfr(y)
            ld = math.log2(1 + e1 * float(y) ** self._gf)
            x = y + y * self._powg(y) - 1
            if x <= 0:
                return +self.r1, ld
            for _ in range(int(k) - 1):
                ld += math.log2(1 + e1 * float(x) ** self._gf)
                x = x + x * self._powg(x)
                if x >= 1:
                    return mpfr(1), ld
            if x < self.r1:
                return +self.r1, ld
            return (x if x <= 1 else mpfr(1)), ld

    def left_pullback(self, n, y):
        with self._ctx():
            y = mpfr(y)
            for _ in range(int(n)):
                y = self.left_inv(y)
            return y

    def phi(self, m, y):
        """Inverse branch of the induced map onto the cell with return time m."""
        return self.right_inv(self.left_pullback(int(m) - 1, y))

    def pullback(self, symbols, y):
        # apply the innermost branch first
        with self._ctx():
            y = mpfr(y)
            for m in reversed(list(symbols)):
                y = self.right_inv(self.left_pullback(int(m) - 1, y))
            return y

    def extend_r(self, r_last, count):
        out = []
        with self._ctx():
            y = mpfr(r_last)
            for _ in range(int(count)):
                y = self.left_inv(y)
                out.append(y)
        return out

    def right_inv_many(self, ys):
        return [self.right_inv(y) for y in ys]

    def moran_lengths(self, K, depth):
        K = int(K)
        depth = int(depth)
        with self._ctx():
            level = [(self.r1, mpfr(1))]
            out = array("d")
            if depth == 0:
                out.append(float(level[0][1] - level[0][0]))
                return out
            for d in range(depth):
                last = d == depth - 1
                nxt = []
                for a, b in level:
                    ya, yb = a, b
                    for m in range(1, K + 1):
                        if m > 1:
                            ya = self.left_inv(ya)
                            yb = self.left_inv(yb)
                        ra = self.right_inv(ya)
                        rb = self.right_inv(yb)
                        if last:
                            out.append(float(rb - ra))
                        else:
                            nxt.append((ra, rb))
                level = nxt
            return out

