import json

import numpy as np
import pandas as pd

from report_store import ReportStore, dumps, to_plain


def test_to_plain_handles_numpy_and_non_finite():
    data = to_plain({'a': np.float64(0.5), 'b': np.int64(3), 'c': (1, 2),
                     'd': float('inf'), 'e': -np.inf, 'f': np.nan, 'g': np.bool_(True),
                     1: np.array([1.0, 2.0])})
    assert data == {'a': 0.5, 'b': 3, 'c': [1, 2], 'd': 'inf', 'e': '-inf', 'f': 'nan',
                    'g': True, '1': [1.0, 2.0]}
    assert type(data['b']) is int


def test_dumps_sorts_keys():
    text = dumps({'b': 1, 'a': {'z': 2, 'y': 3}})
    assert text.index('"a"') < text.index('"b"')
    assert text.index('"y"') < text.index('"z"')
    assert text.endswith('\n')


def test_csv_doubles_round_trip(tmp_path):
    store = ReportStore(tmp_path)
    path = store.save_table('curve', pd.DataFrame({'r': [0.1, 1.0 / 3.0], 'F': [np.pi, -2.5e-300]}))
    lines = path.read_text().splitlines()
    assert lines[0] == 'r,F'
    assert lines[1].startswith('0.10000000000000001,')

    back = pd.read_csv(path, float_precision='round_trip')
    assert back['r'].tolist() == [0.1, 1.0 / 3.0]
    assert back['F'].tolist() == [np.pi, -2.5e-300]


def test_summary_is_stamped(tmp_path):
    store = ReportStore(tmp_path / 'nested')
    path = store.save_summary('summary', {'verdict': {'passed': True}, 'lambda_star': np.inf})
    data = json.loads(path.read_text())
    assert data['schema_version'] == 1
    assert data['lambda_star'] == 'inf'
    assert list(data) == sorted(data)


def test_save_bundle(tmp_path):
    store = ReportStore(tmp_path)
    tables = {'norms': pd.DataFrame({'r': [1.0], 'M2': [2.0], 'N2': [3.0]}),
              'metric': pd.DataFrame({'r': [1.0]})}
    counts = store.save_bundle({'scenario': 'x'}, tables)
    assert counts == {'tables': 2, 'summaries': 1}
    assert sorted(p.name for p in tmp_path.iterdir()) == ['metric.csv', 'norms.csv', 'summary.json']
