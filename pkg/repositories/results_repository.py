"""
Results repository for study outputs
Writes CSV tables with 9 significant digits and Matrix Market dumps
"""

from pathlib import Path
from typing import Union

import pandas as pd
import scipy.io
import scipy.sparse as sp

from repositories.base import BaseRepository

FLOAT_FORMAT = "%.9g"


class ResultsRepository(BaseRepository[pd.DataFrame]):
    """CSV tables under the output directory"""

    def __init__(self, root: Union[str, Path]):
        super().__init__(root, 'results', '.csv')

    def save(self, frame: pd.DataFrame, name: str) -> Path:
        self.ensure_root()
        path = self.path_for(name)
        self.log_operation("SAVE", path.name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def load(self, name: str) -> pd.DataFrame:
        path = self.path_for(name)
        self.log_operation("LOAD", path.name)
        return pd.read_csv(path, float_precision='round_trip')

    def save_matrix(self, A: sp.spmatrix, name: str) -> Path:
        """Matrix Market coordinate dump"""
        self.ensure_root()
        path = self.root / (name if name.endswith('.mtx') else f"{name}.mtx")
        self.log_operation("SAVE MATRIX", path.name)
        scipy.io.mmwrite(str(path), sp.coo_matrix(A), precision=17)
        return path
