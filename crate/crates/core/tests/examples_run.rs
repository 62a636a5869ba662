//! Every example must keep running against the current library.

mod all_scorers {
    include!("../examples/all_scorers.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod auroc_report {
    include!("../examples/auroc_report.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod geometry_experiment {
    include!("../examples/geometry_experiment.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod knn_scoring {
    include!("../examples/knn_scoring.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod manifest_pipeline {
    include!("../examples/manifest_pipeline.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod store_roundtrip {
    include!("../examples/store_roundtrip.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}

mod train_probe {
    include!("../examples/train_probe.rs");

    #[test]
    fn runs() {
        run_example().unwrap();
    }
}
