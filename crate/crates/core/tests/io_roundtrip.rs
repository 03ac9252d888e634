use lava::correlation::locality_correlations;
use lava::io::{self, MatrixFormat, SampleLabels};
use lava::matrix::Matrix;
use lava::placement::LocalitySet;
use lava::rng::rng_from_seed;
use lava::synthetic::clustered_samples;
use lava::{load_config, CorrelationDataset, LavaError, PipelineConfig};
use rand::Rng;

#[test]
fn delimited_parse() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    std::fs::write(&p, "1,2\n3,4\n").unwrap();
    let m = io::load_matrix(&p, MatrixFormat::Delimited).unwrap();
    assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
}

#[test]
fn delimited_header_is_kept_as_names() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    std::fs::write(&p, "gene_a,gene_b,gene_c\n1,2,3\n4,5,6\n").unwrap();
    let f = io::load_features(&p).unwrap();
    assert_eq!(f.feature_names(), ["gene_a", "gene_b", "gene_c"]);
    assert_eq!(f.num_samples(), 2);
}

#[test]
fn random_matrix_roundtrips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_from_seed(17);
    // values representable in f32 so both formats must be bit-identical
    let m = Matrix::from_fn(5, 7, |_, _| (rng.random::<f32>() * 20.0 - 10.0) as f64);
    for (name, fmt) in [("m.bin", MatrixFormat::Binary), ("m.csv", MatrixFormat::Delimited)] {
        let p = dir.path().join(name);
        io::save_matrix(&m, &p, fmt).unwrap();
        let back = io::load_matrix(&p, fmt).unwrap();
        let same = m
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{name} changed values");
        assert_eq!(back.shape(), (5, 7));
    }
}

#[test]
fn identity_roundtrip_and_binary_size() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("id.bin");
    io::save_matrix(&Matrix::identity(3), &p, MatrixFormat::Binary).unwrap();
    assert_eq!(io::load_matrix(&p, MatrixFormat::Binary).unwrap(), Matrix::identity(3));

    let q = dir.path().join("one.bin");
    io::save_matrix(&Matrix::from_rows(&[[0.5]]).unwrap(), &q, MatrixFormat::Binary).unwrap();
    assert_eq!(std::fs::metadata(&q).unwrap().len(), 24 + 4);
}

fn binary_with(rows: u64, cols: u64, payload: &[f32]) -> Vec<u8> {
    let mut buf = io::BINARY_MAGIC.to_vec();
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

#[test]
fn malformed_binary_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("empty", binary_with(0, 3, &[])),
        ("magic", {
            let mut b = binary_with(1, 1, &[1.0]);
            b[0] = b'X';
            b
        }),
        ("short", binary_with(2, 2, &[1.0, 2.0, 3.0])),
        ("nan", binary_with(1, 2, &[1.0, f32::NAN])),
        ("header", b"LAVA".to_vec()),
    ];
    for (name, bytes) in cases {
        let p = dir.path().join(format!("{name}.bin"));
        std::fs::write(&p, bytes).unwrap();
        let err = io::load_matrix(&p, MatrixFormat::Binary).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{name}: {err}");
        assert!(err.to_string().contains(&p.display().to_string()), "{name}: {err}");
    }
}

#[test]
fn malformed_delimited_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("ragged", "1,2\n3\n"),
        ("nan", "1,2\n3,nan\n"),
        ("word", "1,2\n3,x\n"),
        ("blank", ""),
    ] {
        let p = dir.path().join(format!("{name}.csv"));
        std::fs::write(&p, text).unwrap();
        let err = io::load_matrix(&p, MatrixFormat::Delimited).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{name}: {err}");
    }
}

#[test]
fn missing_file_names_the_path() {
    let err = io::load_embeddings("/definitely/not/here.csv").unwrap_err();
    assert!(matches!(err, LavaError::Io { .. }), "{err:?}");
    assert!(err.to_string().contains("/definitely/not/here.csv"));
}

#[test]
fn labels_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.csv");
    let labels = SampleLabels {
        name: "condition".into(),
        labels: vec!["healthy".into(), "disease".into(), "healthy".into()],
    };
    io::save_labels(&labels, &p).unwrap();
    let back = io::load_labels(&p).unwrap();
    assert_eq!(back, labels);
    assert_eq!(back.vocabulary(), vec!["healthy", "disease"]);
}

#[test]
fn correlation_dataset_roundtrip() {
    let s = clustered_samples(100, 8, 4).unwrap();
    let members: Vec<Vec<usize>> = (0..10).map(|i| (0..30).map(|k| (i * 7 + k) % 100).collect()).collect();
    let localities = LocalitySet {
        probes: Matrix::zeros(10, 2),
        members,
    };
    let c = locality_correlations(&s.features, &localities, 0.75).unwrap();
    let dir = tempfile::tempdir().unwrap();
    c.save(dir.path()).unwrap();
    let back = CorrelationDataset::load(dir.path()).unwrap();
    assert_eq!(back.values(), c.values());
    assert_eq!(back.feature_names, c.feature_names);
    assert_eq!(back.num_localities(), 10);
    assert_eq!(back.num_pairs(), 28);
}

#[test]
fn config_file_defaults_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lava.cfg");
    std::fs::write(&p, "n=500\n").unwrap();
    let cfg = load_config(&p).unwrap();
    assert_eq!(cfg.neighborhood_size().unwrap(), 500);
    assert_eq!(cfg.amf.nu, 9.0);

    let cfg = PipelineConfig::parse("gamma = 10 # strong scale term\n").unwrap();
    assert_eq!(cfg.amf.gamma, 10.0);

    for bad in ["o=0", "n=0", "nu=0.5", "bogus=1", "n", "num_runs=1"] {
        let err = PipelineConfig::parse(bad).unwrap_err();
        assert_eq!(err.exit_code(), 1, "{bad}: {err}");
    }
    // n and o are only required by the stages that use them
    assert!(PipelineConfig::parse("").unwrap().neighborhood_size().is_err());
}
