# cython: language_level=3, boundscheck=False, wraparound=False
"""MPFR kernels for branch inverses, pullbacks and forward orbits.

Same interface and semantics as ``_pykernels``. Values cross the boundary
as gmpy2 ``mpfr`` objects and are copied with ``mpfr_set`` only.
"""

from array import array

import gmpy2
from gmpy2 cimport *
from libc.math cimport pow as cpow, fabs, log2

cdef extern from "mpfr.h":
    void mpfr_init2(mpfr_t x, mpfr_prec_t prec)
    void mpfr_clear(mpfr_t x)
    int mpfr_set_ui(mpfr_t rop, unsigned long op, mpfr_rnd_t rnd)
    int mpfr_set_d(mpfr_t rop, double op, mpfr_rnd_t rnd)
    double mpfr_get_d(mpfr_t op, mpfr_rnd_t rnd)
    int mpfr_add(mpfr_t rop, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_sub(mpfr_t rop, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_mul(mpfr_t rop, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_div(mpfr_t rop, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_sqrt(mpfr_t rop, mpfr_t a, mpfr_rnd_t rnd)
    int mpfr_pow(mpfr_t rop, mpfr_t a, mpfr_t b, mpfr_rnd_t rnd)
    int mpfr_pow_ui(mpfr_t rop, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_add_ui(mpfr_t rop, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_sub_ui(mpfr_t rop, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_mul_ui(mpfr_t rop, mpfr_t a, unsigned long b, mpfr_rnd_t rnd)
    int mpfr_mul_2si(mpfr_t rop, mpfr_t a, long b, mpfr_rnd_t rnd)
    int mpfr_cmp(mpfr_t a, mpfr_t b)
    int mpfr_cmp_ui(mpfr_t a, unsigned long b)
    int mpfr_cmp_d(mpfr_t a, double b)
    int mpfr_sgn(mpfr_t a)
    void mpfr_set_prec(mpfr_t x, mpfr_prec_t prec)
    int mpfr_prec_round(mpfr_t x, mpfr_prec_t prec, mpfr_rnd_t rnd)
    void mpfr_swap(mpfr_t x, mpfr_t y)

import_gmpy2()

BACKEND_NAME = "compiled"

cdef enum:
    KIND_ONE = 0
    KIND_INT = 1
    KIND_HALF = 2
    KIND_GENERIC = 3


cdef double _double_root(double c, double gamma, double x0):
    cdef double e = 1.0 + gamma
    cdef double x = x0, h, xn
    cdef int i
    for i in range(60):
        h = x + cpow(x, e) - c
        xn = x - h / (1.0 + e * cpow(x, gamma))
        if xn <= 0.0:
            xn = x / 2.0
        if fabs(xn - x) <= 1e-16 * x:
            return xn
        x = xn
    return x


cdef class Branches:
    cdef readonly long prec
    cdef readonly object gamma
    cdef readonly object r1
    cdef mpfr_t g, expo, t1, t2, t3, x, xn, c, wa, wb, xs
    cdef int kind
    cdef unsigned long gi
    cdef double gf
    cdef bint ready

    def __cinit__(self):
        self.ready = False

    def __init__(self, gamma, long prec):
        if prec < 64:
            raise ValueError("precision must be at least 64 bits")
        self.prec = prec
        mpfr_init2(self.g, prec)
        mpfr_init2(self.expo, prec)
        mpfr_init2(self.t1, prec)
        mpfr_init2(self.t2, prec)
        mpfr_init2(self.t3, prec)
        mpfr_init2(self.x, prec)
        mpfr_init2(self.xn, prec)
        mpfr_init2(self.c, prec)
        mpfr_init2(self.wa, prec)
        mpfr_init2(self.wb, prec)
        mpfr_init2(self.xs, prec)
        self.ready = True
        with gmpy2.context(precision=prec):
            gm = gmpy2.mpfr(gamma)
        if not gm > 0:
            raise ValueError("gamma must be positive")
        self.gamma = gm
        mpfr_set(self.g, (<mpfr>gm).f, MPFR_RNDN)
        mpfr_add_ui(self.expo, self.g, 1, MPFR_RNDN)
        self.gf = float(gm)
        self.kind = KIND_GENERIC
        if self.gf == 1.0:
            self.kind = KIND_ONE
        elif self.gf == <double>(<long>self.gf) and self.gf <= 64:
            self.kind = KIND_INT
            self.gi = <unsigned long>self.gf
        elif 2 * self.gf == <double>(<long>(2 * self.gf)) and self.gf <= 64:
            self.kind = KIND_HALF
            self.gi = <unsigned long>(self.gf - 0.5)
        mpfr_set_ui(self.wa, 0, MPFR_RNDN)
        self._right(self.wa, self.wa)
        self.r1 = self._out(self.wa)

    def __dealloc__(self):
        if self.ready:
            mpfr_clear(self.g)
            mpfr_clear(self.expo)
            mpfr_clear(self.t1)
            mpfr_clear(self.t2)
            mpfr_clear(self.t3)
            mpfr_clear(self.x)
            mpfr_clear(self.xn)
            mpfr_clear(self.c)
            mpfr_clear(self.wa)
            mpfr_clear(self.wb)
            mpfr_clear(self.xs)

    cdef object _out(self, mpfr_t v):
        cdef mpfr res = GMPy_MPFR_New(self.prec, NULL)
        mpfr_set(res.f, v, MPFR_RNDN)
        return res

    cdef int _in(self, mpfr_t dst, object v) except -1:
        cdef mpfr m
        if isinstance(v, gmpy2.mpfr):
            m = <mpfr>v
        else:
            with gmpy2.context(precision=self.prec):
                m = <mpfr>gmpy2.mpfr(v)
        mpfr_set(dst, m.f, MPFR_RNDN)
        return 0

    # rop = op**gamma; rop must not alias op
    cdef inline void _powg(self, mpfr_t rop, mpfr_t op):
        if self.kind == KIND_ONE:
            mpfr_set(rop, op, MPFR_RNDN)
        elif self.kind == KIND_INT:
            mpfr_pow_ui(rop, op, self.gi, MPFR_RNDN)
        elif self.kind == KIND_HALF:
            mpfr_sqrt(rop, op, MPFR_RNDN)
            if self.gi > 0:
                mpfr_pow_ui(self.t3, op, self.gi, MPFR_RNDN)
                mpfr_mul(rop, rop, self.t3, MPFR_RNDN)
        else:
            mpfr_pow(rop, op, self.g, MPFR_RNDN)

    cdef void _set_work_prec(self, long q):
        mpfr_set_prec(self.t1, q)
        mpfr_set_prec(self.t2, q)
        mpfr_set_prec(self.t3, q)
        mpfr_set_prec(self.xn, q)

    # one Newton step for x + x**(1+gamma) = c, rounded to the temporaries' precision
    cdef void _newton_step(self):
        self._powg(self.t1, self.x)
        mpfr_mul(self.t2, self.x, self.t1, MPFR_RNDN)
        mpfr_add(self.t2, self.t2, self.x, MPFR_RNDN)
        mpfr_sub(self.t2, self.t2, self.c, MPFR_RNDN)
        mpfr_mul(self.t1, self.t1, self.expo, MPFR_RNDN)
        mpfr_add_ui(self.t1, self.t1, 1, MPFR_RNDN)
        mpfr_div(self.t2, self.t2, self.t1, MPFR_RNDN)
        mpfr_sub(self.xn, self.x, self.t2, MPFR_RNDN)
        mpfr_swap(self.x, self.xn)

    # root of x + x**(1+gamma) = c (in self.c) below the upper bound
    cdef void _solve(self, mpfr_t rop, double upper_d, bint upper_is_c):
        cdef double cf, gd
        cdef int i
        cdef long acc, q
        cdef bint ok, staged
        if self.kind == KIND_ONE:
            # 2c / (1 + sqrt(1 + 4c))
            mpfr_mul_2si(self.t1, self.c, 2, MPFR_RNDN)
            mpfr_add_ui(self.t1, self.t1, 1, MPFR_RNDN)
            mpfr_sqrt(self.t1, self.t1, MPFR_RNDN)
            mpfr_add_ui(self.t1, self.t1, 1, MPFR_RNDN)
            mpfr_mul_2si(self.t2, self.c, 1, MPFR_RNDN)
            mpfr_div(rop, self.t2, self.t1, MPFR_RNDN)
            return
        cf = mpfr_get_d(self.c, MPFR_RNDN)
        ok = False
        if cf > 1e-280:
            gd = _double_root(cf, self.gf, upper_d if upper_d < cf else cf)
            gd = gd * (1.0 + 1e-12)
            mpfr_set_d(self.x, gd, MPFR_RNDN)
            if upper_is_c:
                if mpfr_cmp(self.x, self.c) > 0:
                    mpfr_set(self.x, self.c, MPFR_RNDN)
            elif mpfr_cmp_ui(self.x, 1) > 0:
                mpfr_set_ui(self.x, 1, MPFR_RNDN)
            self._powg(self.t1, self.x)
            mpfr_mul(self.t1, self.t1, self.x, MPFR_RNDN)
            mpfr_add(self.t1, self.t1, self.x, MPFR_RNDN)
            ok = mpfr_cmp(self.t1, self.c) >= 0
        staged = False
        if not ok:
            if upper_is_c:
                mpfr_set(self.x, self.c, MPFR_RNDN)
            else:
                mpfr_set_ui(self.x, 1, MPFR_RNDN)
        elif 80 < self.prec:
            # the guess is good to ~40 bits: double the accuracy at growing precision
            mpfr_set(self.xs, self.x, MPFR_RNDN)
            acc = 40
            while 2 * acc < self.prec:
                q = 2 * acc + 32
                self._set_work_prec(q)
                self._newton_step()
                acc *= 2
            self._set_work_prec(self.prec)
            mpfr_prec_round(self.x, self.prec, MPFR_RNDN)
            mpfr_set_prec(self.xn, self.prec)
            # nudge above the root so the final iteration descends from above
            mpfr_mul_2si(self.t1, self.x, -(acc - 4), MPFR_RNDN)
            mpfr_add(self.x, self.x, self.t1, MPFR_RNDN)
            if upper_is_c:
                if mpfr_cmp(self.x, self.c) > 0:
                    mpfr_set(self.x, self.c, MPFR_RNDN)
            elif mpfr_cmp_ui(self.x, 1) > 0:
                mpfr_set_ui(self.x, 1, MPFR_RNDN)
            staged = True
        for i in range(200):
            self._powg(self.t1, self.x)
            # h = x + x*pg - c
            mpfr_mul(self.t2, self.x, self.t1, MPFR_RNDN)
            mpfr_add(self.t2, self.t2, self.x, MPFR_RNDN)
            mpfr_sub(self.t2, self.t2, self.c, MPFR_RNDN)
            if mpfr_sgn(self.t2) <= 0:
                if staged and i == 0 and mpfr_sgn(self.t2) < 0:
                    # staging fell short: restart from the guess
                    mpfr_set(self.x, self.xs, MPFR_RNDN)
                    staged = False
                    continue
                break
            mpfr_mul(self.t1, self.t1, self.expo, MPFR_RNDN)
            mpfr_add_ui(self.t1, self.t1, 1, MPFR_RNDN)
            mpfr_div(self.t2, self.t2, self.t1, MPFR_RNDN)
            mpfr_sub(self.xn, self.x, self.t2, MPFR_RNDN)
            if mpfr_cmp(self.xn, self.x) >= 0:
                break
            mpfr_set(self.x, self.xn, MPFR_RNDN)
        mpfr_set(rop, self.x, MPFR_RNDN)

    cdef void _left(self, mpfr_t rop, mpfr_t y):
        if mpfr_sgn(y) <= 0:
            mpfr_set_ui(rop, 0, MPFR_RNDN)
            return
        mpfr_set(self.c, y, MPFR_RNDN)
        self._solve(rop, 2.0, True)

    cdef void _right(self, mpfr_t rop, mpfr_t y):
        mpfr_add_ui(self.c, y, 1, MPFR_RNDN)
        self._solve(rop, 1.0, False)

    # x <- f(x) (two branches); returns nothing
    cdef inline void _f(self, mpfr_t x, bint reduce):
        self._powg(self.t1, x)
        mpfr_mul(self.t1, self.t1, x, MPFR_RNDN)
        mpfr_add(x, x, self.t1, MPFR_RNDN)
        if reduce and mpfr_cmp_ui(x, 1) >= 0:
            mpfr_sub_ui(x, x, 1, MPFR_RNDN)

    def left_inv(self, y):
        self._in(self.wa, y)
        self._left(self.wa, self.wa)
        return self._out(self.wa)

    def right_inv(self, y):
        self._in(self.wa, y)
        self._right(self.wa, self.wa)
        return self._out(self.wa)

    def f(self, x):
        self._in(self.wa, x)
        self._f(self.wa, True)
        return self._out(self.wa)

    def forward(self, x, n):
        cdef long i, nn = n
        self._in(self.wa, x)
        for i in range(nn):
            self._f(self.wa, True)
        return self._out(self.wa)

    def forward_left(self, x, n):
        cdef long i, nn = n
        self._in(self.wa, x)
        for i in range(nn):
            self._f(self.wa, False)
        return self._out(self.wa)

    def deriv_product(self, x, n):
        """Return (product of f' along the first n points, f^n(x))."""
        cdef long i, nn = n
        self._in(self.wa, x)
        mpfr_set_ui(self.wb, 1, MPFR_RNDN)
        for i in range(nn):
            self._powg(self.t1, self.wa)
            mpfr_mul(self.t2, self.t1, self.expo, MPFR_RNDN)
            mpfr_add_ui(self.t2, self.t2, 1, MPFR_RNDN)
            mpfr_mul(self.wb, self.wb, self.t2, MPFR_RNDN)
            mpfr_mul(self.t1, self.t1, self.wa, MPFR_RNDN)
            mpfr_add(self.wa, self.wa, self.t1, MPFR_RNDN)
            if mpfr_cmp_ui(self.wa, 1) >= 0:
                mpfr_sub_ui(self.wa, self.wa, 1, MPFR_RNDN)
        return self._out(self.wb), self._out(self.wa)

    def chart_step(self, k, y):
        """Apply the branch of F with return time k to y, clamped to [r1, 1]."""
        cdef long i, kk = k
        self._in(self.wa, y)
        self._in(self.wb, self.r1)
        self._powg(self.t1, self.wa)
        mpfr_mul(self.t1, self.t1, self.wa, MPFR_RNDN)
        mpfr_add(self.wa, self.wa, self.t1, MPFR_RNDN)
        mpfr_sub_ui(self.wa, self.wa, 1, MPFR_RNDN)
        if mpfr_sgn(self.wa) <= 0:
            return self._out(self.wb)
        for i in range(kk - 1):
            self._f(self.wa, False)
            if mpfr_cmp_ui(self.wa, 1) >= 0:
                return self._one()
        if mpfr_cmp(self.wa, self.wb) < 0:
            return self._out(self.wb)
        if mpfr_cmp_ui(self.wa, 1) > 0:
            return self._one()
        return self._out(self.wa)

    def chart_step_d(self, k, y):
        """chart_step plus log2 of the derivative of the branch along the orbit."""
        cdef long i, kk = k
        cdef double ld = 0.0, e1 = self.gf + 1.0, xd
        self._in(self.wa, y)
        self._in(self.wb, self.r1)
        xd = mpfr_get_d(self.wa, MPFR_RNDN)
        ld += log2(1.0 + e1 * cpow(xd, self.gf))
        self._powg(self.t1, self.wa)
        mpfr_mul(self.t1, self.t1, self.wa, MPFR_RNDN)
        mpfr_add(self.wa, self.wa, self.t1, MPFR_RNDN)
        mpfr_sub_ui(self.wa, self.wa, 1, MPFR_RNDN)
        if mpfr_sgn(self.wa) <= 0:
            return self._out(self.wb), ld
        for i in range(kk - 1):
            xd = mpfr_get_d(self.wa, MPFR_RNDN)
            ld += log2(1.0 + e1 * cpow(xd, self.gf))
            self._f(self.wa, False)
            if mpfr_cmp_ui(self.wa, 1) >= 0:
                return self._one(), ld
        if mpfr_cmp(self.wa, self.wb) < 0:
            return self._out(self.wb), ld
        if mpfr_cmp_ui(self.wa, 1) > 0:
            return self._one(), ld
        return self._out(self.wa), ld

    def left_pullback(self, n, y):
        cdef long i, nn = n
        self._in(self.wa, y)
        for i in range(nn):
            self._left(self.wa, self.wa)
        return self._out(self.wa)

    def phi(self, m, y):
        """Inverse branch of the induced map onto the cell with return time m."""
        cdef long i, mm = m
        self._in(self.wa, y)
        for i in range(mm - 1):
            self._left(self.wa, self.wa)
        self._right(self.wa, self.wa)
        return self._out(self.wa)

    def pullback(self, symbols, y):
        cdef long i, m
        self._in(self.wa, y)
        for s in reversed(list(symbols)):
            m = s
            for i in range(m - 1):
                self._left(self.wa, self.wa)
            self._right(self.wa, self.wa)
        return self._out(self.wa)

    def extend_r(self, r_last, count):
        cdef long i, n = count
        out = []
        self._in(self.wa, r_last)
        for i in range(n):
            self._left(self.wa, self.wa)
            out.append(self._out(self.wa))
        return out

    def right_inv_many(self, ys):
        out = []
        for y in ys:
            self._in(self.wb, y)
            self._right(self.wb, self.wb)
            out.append(self._out(self.wb))
        return out

    def moran_lengths(self, K, depth):
        cdef long KK = K, dd = depth, d, m, j, npts
        cdef mpfr_t ra, rb, ya, yb
        out = array("d")
        mpfr_init2(ra, self.prec)
        mpfr_init2(rb, self.prec)
        mpfr_init2(ya, self.prec)
        mpfr_init2(yb, self.prec)
        try:
            if dd == 0:
                mpfr_set_ui(rb, 1, MPFR_RNDN)
                self._in(ra, self.r1)
                mpfr_sub(rb, rb, ra, MPFR_RNDN)
                out.append(mpfr_get_d(rb, MPFR_RNDN))
                return out
            # levels as flat lists of endpoint pairs held in Python mpfr objects
            level = [(self.r1, self._one())]
            for d in range(dd):
                last = d == dd - 1
                nxt_level = []
                for a, b in level:
                    self._in(ya, a)
                    self._in(yb, b)
                    for m in range(1, KK + 1):
                        if m > 1:
                            self._left(ya, ya)
                            self._left(yb, yb)
                        self._right(ra, ya)
                        self._right(rb, yb)
                        if last:
                            mpfr_sub(rb, rb, ra, MPFR_RNDN)
                            out.append(mpfr_get_d(rb, MPFR_RNDN))
                        else:
                            nxt_level.append((self._out(ra), self._out(rb)))
                level = nxt_level
            return out
        finally:
            mpfr_clear(ra)
            mpfr_clear(rb)
            mpfr_clear(ya)
            mpfr_clear(yb)

    cdef object _one(self):
        mpfr_set_ui(self.wb, 1, MPFR_RNDN)
        return self._out(self.wb)
