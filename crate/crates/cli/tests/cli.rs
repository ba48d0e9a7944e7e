use std::path::PathBuf;
use std::process::Command;

use jscsi::source::independent_si_exponent;
use jscsi::Distribution;
use jscsi_cli::scenario::{ChannelKind, ChannelSpec, SourceSpec};
use jscsi_cli::{curves, simulate, CliError, DecoderChoice, Scenario, CURVE_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jscsi"))
}

fn write_config(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("jscsi-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('R'))
        .map(|l| {
            l.split(',')
                .map(|c| {
                    if c == "inf" {
                        f64::INFINITY
                    } else {
                        c.parse().unwrap()
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn reference_preset_expands() {
    let s = Scenario::from_toml(
        "source.preset = \"correlated-binary\"\nchannel.kind = \"bsc\"\nchannel.param = 0.025\n",
    )
    .unwrap();
    assert_eq!(s, Scenario::reference());
    assert_eq!(
        s.source_distribution().unwrap().to_matrix(),
        vec![vec![0.5, 0.0], vec![0.05, 0.45]]
    );
    assert_eq!(
        s.channel_distribution().unwrap().to_matrix(),
        vec![vec![0.975, 0.025], vec![0.025, 0.975]]
    );
}

#[test]
fn emitted_scenarios_parse_back() {
    let mut s = Scenario::reference();
    assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    s.source = SourceSpec {
        preset: None,
        matrix: Some(vec![vec![0.1, 0.2, 0.3], vec![0.15, 0.05, 0.2]]),
    };
    s.channel = ChannelSpec {
        kind: ChannelKind::Matrix,
        param: None,
        size: None,
        matrix: Some(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]]),
    };
    s.grids.rate_step = 0.0025;
    s.seed = 17;
    assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = "source.preset = \"correlated-binary\"\nchannel.kind = \"bsc\"\n";
    let unknown = Scenario::from_toml(&format!("{base}channel.param = 0.1\nchannel.colour = 1\n"))
        .unwrap_err();
    assert!(unknown.to_string().contains("colour"));
    assert_eq!(unknown.exit_code(), 2);
    let rows = "source.matrix = [[0.5, 0.0], [0.05, 0.449]]\nchannel.kind = \"bsc\"\nchannel.param = 0.1\n";
    assert!(matches!(
        Scenario::from_toml(rows),
        Err(CliError::Config(_))
    ));
    assert!(Scenario::from_toml(&format!("{base}channel.param = 0.6\n")).is_err());
    assert!(Scenario::from_toml(&format!("{base}channel.param = -0.1\n")).is_err());
    assert!(Scenario::from_toml(base).is_err());
    assert!(
        Scenario::from_toml("source.preset = \"nope\"\nchannel.kind = \"identity\"\n").is_err()
    );
}

#[test]
fn exit_codes_distinguish_failures() {
    let unknown = write_config("unknown.toml", "source.preset = \"correlated-binary\"\nchannel.kind = \"bsc\"\nchannel.param = 0.1\nextra = 1\n");
    let status = bin()
        .args(["curves", "--config"])
        .arg(&unknown)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));

    let asym = write_config(
        "asym.toml",
        "source.preset = \"correlated-binary\"\nchannel.kind = \"matrix\"\nchannel.matrix = [[0.9, 0.1], [0.3, 0.7]]\n",
    );
    let out = bin()
        .args(["report", "--flat", "--rate-step", "0.01", "--config"])
        .arg(&asym)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let reference = write_config("ref.toml", &Scenario::reference().to_toml());
    let out = bin()
        .args(["simulate", "--n", "9", "--config"])
        .arg(&reference)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin()
        .args(["curves", "--rate-step", "0.05", "--config"])
        .arg(&reference)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with(CURVE_HEADER));
}

#[test]
fn report_on_asymmetric_channel_has_nested_bounds_and_no_completeness_claim() {
    let asym = write_config(
        "asym-report.toml",
        "source.preset = \"correlated-binary\"\nchannel.kind = \"matrix\"\nchannel.matrix = [[0.9, 0.1], [0.3, 0.7]]\n",
    );
    let out = bin()
        .args(["report", "--rate-step", "0.01", "--config"])
        .arg(&asym)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("flat_premise = violated"));
    assert!(text.contains("complete_characterization = false"));
    assert!(text.contains("nested.gap = "));
}

#[test]
fn noiseless_channel_curves() {
    let s =
        Scenario::from_toml("source.preset = \"correlated-binary\"\nchannel.kind = \"identity\"\n")
            .unwrap();
    let rows = parse_csv(&curves(&s, Some(0.05)).unwrap());
    for row in rows {
        let r = row[0];
        // E_0(ρ) = ρ, so E_r = 1 - R and the sphere-packing supremum diverges below 1 bit.
        assert!((row[3] - (1.0 - r)).abs() < 1e-9, "r {r}");
        if r < 1.0 - 1e-9 {
            assert!(row[4].is_infinite());
        } else {
            assert_eq!(row[3], row[4]);
        }
    }
}

#[test]
fn independent_source_upper_column_matches_entropy_constraint() {
    let s = Scenario::from_toml("source.matrix = [[0.24, 0.56], [0.06, 0.14]]\nchannel.kind = \"bsc\"\nchannel.param = 0.1\n").unwrap();
    let pa = Distribution::new(vec![0.8, 0.2]).unwrap();
    for row in parse_csv(&curves(&s, Some(0.05)).unwrap()) {
        let expect = independent_si_exponent(row[0], &pa).unwrap();
        if row[0] < 1.0 - 1e-9 {
            assert!(
                (row[2] - expect).abs() < 1e-6,
                "r {}: {} vs {expect}",
                row[0],
                row[2]
            );
        } else {
            assert!(row[2].is_infinite());
        }
    }
}

#[test]
fn simulation_table_has_a_row_per_seed_and_decoder() {
    let s = Scenario::reference();
    let text = simulate(&s, 4, 5, DecoderChoice::Both).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 10);
    for pair in rows.chunks(2) {
        assert_eq!((pair[0][1], pair[1][1]), ("map", "mmi"));
        let map: f64 = pair[0][3].parse().unwrap();
        let mmi: f64 = pair[1][3].parse().unwrap();
        assert!(map <= mmi);
    }
    assert_eq!(text, simulate(&s, 4, 5, DecoderChoice::Both).unwrap());
}

#[test]
fn single_letter_simulation_is_hand_checkable() {
    let mut s = Scenario::reference();
    s.simulation.rule = jscsi_cli::scenario::Rule::Uniform;
    let text = simulate(&s, 1, 1, DecoderChoice::Map).unwrap();
    // At n = 1 the balanced composition rounds to the single letter 0, so both
    // sources share one codeword and MAP guesses from b alone: b = 0 loses
    // P(1, 0) = 0.05 and b = 1 is never wrong.
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let pe: f64 = row[3].parse().unwrap();
    assert!((pe - 0.05).abs() < 1e-12, "{pe}");
}
