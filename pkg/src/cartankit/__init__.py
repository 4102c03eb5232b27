"""Exact symbolic toolkit for Cartan algebroids, their realizations and jet groupoids.

All arithmetic is over rational functions with Fraction coefficients, so every
verdict is exact. Modules: ratfield (rational functions and linear algebra),
chartcalc (forms and vector fields), tableau (Spencer cohomology), jets,
algebroid (integrability conditions), realization, sft (groupoid-to-algebroid
pipeline) and cli.
"""
