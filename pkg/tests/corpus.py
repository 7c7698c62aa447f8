"""Expressions used by the differentiation checks, all smooth on [0.5, 2]."""

import numpy as np

CORPUS = [
    "y",
    "y^2",
    "y^3 - 2*y + 1",
    "1/y",
    "-1/(6*y+1)",
    "1/(4*y^2)",
    "sqrt(y)",
    "y^(1/3)",
    "y^2.5",
    "exp(-2*y)",
    "exp(y^2)/10",
    "ln(y)",
    "ln(1 + y^2)",
    "sin(y)",
    "cos(3*y)",
    "tan(y/2)",
    "tanh(y - 1)",
    "atan(2*y)",
    "atanh(y/3)",
    "sin(y)*exp(-y)",
    "y*ln(y) - y",
    "(y+1)/(y-3)",
    "sqrt(1 + sin(y)^2)",
    "2^y",
    "y^y",
]

POINTS = np.linspace(0.5, 2.0, 100)
