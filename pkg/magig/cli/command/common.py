def add_run_arguments(parser) -> None:
    parser.add_argument("--config", help="experiment INI file")
    parser.add_argument("--seed", type=int, help="override the experiment and dataset seed")
    parser.add_argument("--out", help="run directory (overrides [experiment] output_dir)")


def add_model_arguments(parser) -> None:
    parser.add_argument("--classifier", help="classifier checkpoint (default: <out>/classifier.ckpt)")
    parser.add_argument("--vae", help="autoencoder checkpoint, required for eig and magig")


def add_method_arguments(parser) -> None:
    parser.add_argument("--method", help="comma-separated method labels or names (gxi, ig, gig, eig, magig)")
    parser.add_argument("--steps", type=int, help="integration steps K")
    parser.add_argument("--fraction", type=float, help="selection fraction q for guided methods")
    parser.add_argument("--eta", type=float, help="step size for guided methods")
    parser.add_argument("--slerp", action="store_true", help="spherical latent interpolation")
    parser.add_argument("--baseline", choices=["zero", "mean"], help="attribution baseline")


def add_sample_arguments(parser) -> None:
    parser.add_argument("--samples", type=int, help="number of held-out samples to use")
    parser.add_argument("--sample-ids", dest="sample_ids", help="comma-separated dataset row ids")
    parser.add_argument("--workers", type=int, help="worker threads for per-sample fan-out")
