//! The LP-format export, read back by HiGHS's own parser, gives the same
//! optimum as the in-memory model.

use std::ffi::CString;

use treemilo::experiments::random_instance;
use treemilo::formulations::{BuildOptions, Formulation, FormulationKind};
use treemilo::milp::{solve, HighsBackend, SolveConfig};
use treemilo::TreeTopology;

fn solve_lp_file(path: &std::path::Path) -> f64 {
    let file = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let h = highs_sys::Highs_create();
        highs_sys::Highs_setBoolOptionValue(h, c"output_flag".as_ptr(), 0);
        highs_sys::Highs_setIntOptionValue(h, c"threads".as_ptr(), 1);
        assert_eq!(highs_sys::Highs_readModel(h, file.as_ptr()), 0, "HiGHS rejected {}", path.display());
        assert_eq!(highs_sys::Highs_run(h), 0);
        let obj = highs_sys::Highs_getObjectiveValue(h);
        highs_sys::Highs_destroy(h);
        obj
    }
}

#[test]
fn exported_models_solve_to_the_same_optimum() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [3u64, 7, 13] {
        let d = random_instance(seed);
        let topo = TreeTopology::new(2).unwrap();
        for kind in FormulationKind::ALL {
            let f = Formulation::build(kind, topo, &d, &BuildOptions::default()).unwrap();
            let path = dir.path().join(format!("{seed}_{kind}.lp"));
            std::fs::write(&path, f.model.to_lp_format()).unwrap();
            let direct = solve(&HighsBackend, &f.model, &SolveConfig::default()).report.objective;
            let read_back = solve_lp_file(&path);
            assert!((direct - read_back).abs() < 1e-6, "{kind} seed {seed}: {direct} vs {read_back}");
        }
    }
}
