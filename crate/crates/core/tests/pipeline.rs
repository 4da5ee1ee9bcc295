//! Config to simulation to CSV to fit to report, through the public API.

use phonolab::dataio::{
    emit_plot, load_config, read_series, save_config, Dataset, FitReport, PlotStyle, ProtocolConfig,
};
use phonolab::estimation::{fit_ring_up_ring_down, RingUpFit};
use phonolab::protocols::{simulate_ring_up_ring_down, SeriesKind};

const CONFIG: &str = r#"{
    "device": {
        "omega_m": 4457.37e6, "omega_q": 4220e6, "g": 9e6, "alpha": 318e6,
        "T1": 494e-9, "T2": 750e-9, "kappa1": 480e3, "kappa_phi": 0,
        "cal_V_to_U": 6041666.666666667
    },
    "protocol": {"ringupdown": {
        "drive": {"V": 0.72},
        "t_d": 2e-6,
        "times": {"linspace": {"start": 1e-7, "stop": 5e-6, "num": 50}}
    }},
    "noise": {"sigma_abs": 0.05, "sigma_rel": 0.0, "seed": 42}
}"#;

#[test]
fn ring_up_pipeline() {
    let cfg = load_config(CONFIG).unwrap();
    assert!(cfg.validate().unwrap().is_empty());
    assert_eq!(load_config(&save_config(&cfg).unwrap()).unwrap(), cfg);

    let u = cfg.protocol.drive().angular(&cfg.device).unwrap();
    assert!((u - 4.35e6).abs() < 1e-6);
    let ProtocolConfig::Ringupdown { times, t_d, .. } = &cfg.protocol else { panic!() };
    let run = simulate_ring_up_ring_down(&cfg.device, u, *t_d, &times.values(), &cfg.solver.settings()).unwrap();
    assert!(run.dim >= 20);

    let data = Dataset::Series(run.output).with_noise(&cfg.noise);
    let mut csv = Vec::new();
    data.write_csv(&mut csv).unwrap();
    let series = read_series(csv.as_slice(), SeriesKind::RingUpRingDown).unwrap();
    assert_eq!(Dataset::Series(series.clone()), data);
    assert!(series.sigma.iter().all(|&s| s == 0.05));

    let svg = emit_plot(&data, &PlotStyle::for_series(&series)).unwrap();
    assert_eq!(svg.matches("<circle").count(), 50);

    let fit = fit_ring_up_ring_down(&series, &RingUpFit::new(*t_d, 3.5e6, 400e3)).unwrap();
    assert!(fit.converged);
    for (name, truth) in [("U", 4.35e6), ("kappa1", 480e3)] {
        let z = (fit.params[name] - truth) / fit.sigmas[name];
        assert!(z.abs() < 4.0, "{name}: {} +- {}", fit.params[name], fit.sigmas[name]);
    }
    let report = FitReport::new("ringupdown", fit);
    let back = FitReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}
