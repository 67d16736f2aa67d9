"""Shared worked-example matrices used across the test modules."""

import numpy as np
import pytest

from asymspec import MatrixSeries


@pytest.fixture
def ex_2x2():
    # [[1, e], [e, 2e^2 + e^3]]
    return MatrixSeries(
        2,
        {
            0: [[1, 0], [0, 0]],
            1: [[0, 1], [1, 0]],
            2: [[0, 0], [0, 2]],
            3: [[0, 0], [0, 1]],
        },
        symmetric=True,
    )


@pytest.fixture
def ex_example1():
    # [[1+e+e^2, e+e^2, e^2], [e+e^2, e+e^2, e^2], [e^2, e^2, e^2]]
    return MatrixSeries(
        3,
        {
            0: [[1, 0, 0], [0, 0, 0], [0, 0, 0]],
            1: [[1, 1, 0], [1, 1, 0], [0, 0, 0]],
            2: np.ones((3, 3)),
        },
        symmetric=True,
    )


@pytest.fixture
def ex_scaling_3x3():
    # [[1, e^2+e^3, 0], [e^2+e^3, 5e^3, 0], [0, 0, e]]
    return MatrixSeries(
        3,
        {
            0: [[1, 0, 0], [0, 0, 0], [0, 0, 0]],
            1: [[0, 0, 0], [0, 0, 0], [0, 0, 1]],
            2: [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
            3: [[0, 1, 0], [1, 5, 0], [0, 0, 0]],
        },
        symmetric=True,
    )


@pytest.fixture
def ex_scaling_2x2():
    # the 2x2 corner: [[1, e^2+e^3], [e^2+e^3, 5e^3]]
    return MatrixSeries(
        2,
        {0: [[1, 0], [0, 0]], 2: [[0, 1], [1, 0]], 3: [[0, 1], [1, 5]]},
        symmetric=True,
    )


@pytest.fixture
def ex_5x5():
    return MatrixSeries(
        5,
        {
            0: np.diag([1.0, 0, 0, 0, 0]),
            1: [
                [0, 0.5, 0, 0, 0],
                [0.5, 0, 0, 0, 0],
                [0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0],
            ],
            2: [
                [0, 0, 0, 0, 0],
                [0, 0.25, 0.5, 0, 0],
                [0, 0.5, 1, 0, 0],
                [0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0],
            ],
            3: [
                [0, 0, 0, 0, 0],
                [0, 0, 0, 0, 0],
                [0, 0, 0, 0.5, 0],
                [0, 0, 0.5, 0, 0],
                [0, 0, 0, 0, 0],
            ],
            4: [
                [0, 0, 1, 0, 0],
                [0, 0, 0, 0, 0],
                [1, 0, 0, 0, 0],
                [0, 0, 0, 0.125, 0.5],
                [0, 0, 0, 0.5, 1],
            ],
        },
        symmetric=True,
    )


@pytest.fixture
def ex_3x3():
    # [[1, e, e], [e, e^3, -e^3], [e, -e^3, e^3]]
    return MatrixSeries(
        3,
        {
            0: [[1, 0, 0], [0, 0, 0], [0, 0, 0]],
            1: [[0, 1, 1], [1, 0, 0], [1, 0, 0]],
            3: [[0, 0, 0], [0, 1, -1], [0, -1, 1]],
        },
        symmetric=True,
    )


@pytest.fixture
def ex_3x3_gkf():
    v = np.array([[1.0, 0, 0], [0, 1, -1], [0, 1, 1]])
    w = np.array([[1.0, 1, 0], [1, 0, 0], [0, 0, 1]])
    return v, w


@pytest.fixture
def ex_degenerate():
    # [[1, e, e], [e, 2e^2, e^2], [e, e^2, e^2+e^3]]
    return MatrixSeries(
        3,
        {
            0: [[1, 0, 0], [0, 0, 0], [0, 0, 0]],
            1: [[0, 1, 1], [1, 0, 0], [1, 0, 0]],
            2: [[0, 0, 0], [0, 2, 1], [0, 1, 1]],
            3: [[0, 0, 0], [0, 0, 0], [0, 0, 1]],
        },
        symmetric=True,
    )
