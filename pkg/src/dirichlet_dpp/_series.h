/* Sum of w[j-1] cos(2 pi j t) over j = 1..J for SERIES_LANES points at once. */
#ifndef DIRICHLET_DPP_SERIES_H
#define DIRICHLET_DPP_SERIES_H

#include <math.h>

#define SERIES_LANES 32
#define SERIES_BLOCK 64    /* terms per Chebyshev run */
#define SERIES_ANCHOR 32   /* blocks between exact re-anchors */

static double frac_turn(double x) { return x - floor(x); }

static void cos_series_block(const double *t, const double *w, long J, double *out)
{
    const double tau = 6.283185307179586476925286766559;
    double twoc[SERIES_LANES], c1[SERIES_LANES], s1[SERIES_LANES];
    double rc[SERIES_LANES], rs[SERIES_LANES], zr[SERIES_LANES], zi[SERIES_LANES];
    double a[SERIES_LANES], b[SERIES_LANES], acc[SERIES_LANES];
    long j0, j, jend, blk;
    int q;
    for (q = 0; q < SERIES_LANES; q++) {
        double th = tau * frac_turn(t[q]);
        c1[q] = cos(th);
        s1[q] = sin(th);
        twoc[q] = 2.0 * c1[q];
        th = tau * frac_turn((double)SERIES_BLOCK * t[q]);
        rc[q] = cos(th);
        rs[q] = sin(th);
        acc[q] = 0.0;
    }
    for (j0 = 1, blk = 0; j0 <= J; j0 = jend, blk++) {
        jend = j0 + SERIES_BLOCK;
        if (jend > J + 1)
            jend = J + 1;
        /* z = exp(i j0 theta): exact every SERIES_ANCHOR blocks, rotated in between */
        if (blk % SERIES_ANCHOR == 0) {
            for (q = 0; q < SERIES_LANES; q++) {
                double th = tau * frac_turn((double)j0 * t[q]);
                zr[q] = cos(th);
                zi[q] = sin(th);
            }
        } else {
            for (q = 0; q < SERIES_LANES; q++) {
                double r = zr[q] * rc[q] - zi[q] * rs[q];
                zi[q] = zr[q] * rs[q] + zi[q] * rc[q];
                zr[q] = r;
            }
        }
        for (q = 0; q < SERIES_LANES; q++) {
            b[q] = zr[q];
            a[q] = zr[q] * c1[q] + zi[q] * s1[q];  /* cos((j0 - 1) theta) */
        }
        for (j = j0; j + 1 < jend; j += 2) {
            const double w0 = w[j - 1], w1 = w[j];
            for (q = 0; q < SERIES_LANES; q++) {
                acc[q] += w0 * b[q];
                a[q] = twoc[q] * b[q] - a[q];
                acc[q] += w1 * a[q];
                b[q] = twoc[q] * a[q] - b[q];
            }
        }
        if (j < jend)
            for (q = 0; q < SERIES_LANES; q++)
                acc[q] += w[j - 1] * b[q];
    }
    for (q = 0; q < SERIES_LANES; q++)
        out[q] = acc[q];
}

#endif
