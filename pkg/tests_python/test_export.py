"""Unit tests for the attention heatmap export"""

import numpy as np
import pytest

from dess_aste.corpus import Sentence, encode_tokens
from dess_aste.errors import ShapeFault
from dess_aste.export import attention_matrix, export_attention, to_grayscale


@pytest.fixture
def seven_tokens():
    return Sentence(id="heat", tokens=("The", "food", "was", "delicious", "and", "cheap", "."))


class TestAttentionMatrix:
    """Selecting a layer and head"""

    def test_mean_rows_sum_to_one(self, tiny_model, mini_vocab, seven_tokens):
        matrix = attention_matrix(tiny_model, encode_tokens(mini_vocab, seven_tokens))
        assert matrix.shape == (7, 7)
        assert np.allclose(matrix.sum(axis=1), 1.0, atol=1e-6)

    def test_single_head(self, tiny_model, mini_vocab, seven_tokens):
        encoded = encode_tokens(mini_vocab, seven_tokens)
        heads = [attention_matrix(tiny_model, encoded, layer=0, head=h) for h in range(2)]
        assert np.allclose((heads[0] + heads[1]) / 2, attention_matrix(tiny_model, encoded, layer=0), atol=1e-7)

    @pytest.mark.parametrize("layer, head", [(2, "mean"), (-3, "mean"), (0, 2), (0, "max")])
    def test_out_of_range(self, tiny_model, mini_vocab, seven_tokens, layer, head):
        with pytest.raises(ShapeFault):
            attention_matrix(tiny_model, encode_tokens(mini_vocab, seven_tokens), layer=layer, head=head)

    def test_keeps_training_mode(self, tiny_model, mini_vocab, seven_tokens):
        tiny_model.train()
        attention_matrix(tiny_model, encode_tokens(mini_vocab, seven_tokens))
        assert tiny_model.training


class TestExportFiles:
    """CSV and PGM output"""

    def test_csv(self, tiny_model, mini_vocab, seven_tokens, tmp_path):
        written = export_attention(tiny_model, mini_vocab, [seven_tokens], tmp_path / "maps")

        assert written == [tmp_path / "maps" / "heat.csv"]
        rows = np.loadtxt(written[0], delimiter=",")
        assert rows.shape == (7, 7)
        assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-6)

    def test_pgm(self, tiny_model, mini_vocab, seven_tokens, tmp_path):
        written = export_attention(tiny_model, mini_vocab, [seven_tokens], tmp_path, pgm=True)

        data = (tmp_path / "heat.pgm").read_bytes()
        header = b"P5\n7 7\n255\n"
        assert tmp_path / "heat.pgm" in written
        assert data.startswith(header)
        assert len(data) == len(header) + 49
        assert max(data[len(header):]) == 255

    def test_grayscale(self):
        assert to_grayscale(np.array([[0.0, 0.5], [0.25, 1.0]])).tolist() == [[0, 128], [64, 255]]
        assert to_grayscale(np.zeros((2, 2))).tolist() == [[0, 0], [0, 0]]
