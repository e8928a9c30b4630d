import numpy as np
import pytest

from nexusboost.dataset import REQUIRED_KEYS

HEADER = ",".join(REQUIRED_KEYS)
ROW = "2010,7,88.1,65.2,93,71,18,8,4.1,0.5,5200,1.95,1400,2100"


def climate_row(year, month, water=5200.0, electricity=1.95, humidity=71.0):
    return f"{year},{month},88.1,65.2,93,{humidity},18,8,4.1,0.5,{water},{electricity},1400,2100"


@pytest.fixture
def write_rows(tmp_path):
    def write(rows, header=HEADER, name="data.csv"):
        path = tmp_path / name
        path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
        return path
    return write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
