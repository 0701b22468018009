use crate::embedding::LabelEmbeddingTable;

/// Four labels in two dimensions whose normalized VLEs are
/// (0.78, 0.22), (0.56, 0.44), (0.37, 0.63) and (0.5, 0.5), with
/// `alpha = 10`, `beta = 1`.
pub(crate) fn figure_table() -> LabelEmbeddingTable {
    let targets = [[0.78, 0.22], [0.56, 0.44], [0.37, 0.63], [0.5, 0.5]];
    let raw = targets
        .iter()
        .flat_map(|t| t.map(|y: f64| y.exp_m1().ln()))
        .collect();
    LabelEmbeddingTable::from_raw(4, 2, raw, 10.0, 1.0, true).unwrap()
}
