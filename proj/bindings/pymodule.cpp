#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpslm/discrim.hpp"
#include "dpslm/dpdp.hpp"
#include "dpslm/io.hpp"
#include "dpslm/kmeans.hpp"
#include "dpslm/ngram.hpp"
#include "dpslm/parallel.hpp"
#include "dpslm/rate.hpp"

namespace py = pybind11;
using namespace dpslm;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FeatureSequence to_sequence(const FloatArray& frames, float rate, std::string utt_id) {
  if (frames.ndim() != 2) {
    throw Error(ErrorCategory::BadArgument, "frames must be a 2-D array");
  }
  FeatureSequence seq;
  seq.utt_id = std::move(utt_id);
  seq.num_frames = static_cast<std::size_t>(frames.shape(0));
  seq.dim = static_cast<std::size_t>(frames.shape(1));
  seq.frame_rate_hz = rate;
  seq.data.assign(frames.data(), frames.data() + frames.size());
  validate(seq);
  return seq;
}

Codebook to_codebook(const FloatArray& centroids) {
  if (centroids.ndim() != 2) {
    throw Error(ErrorCategory::BadArgument, "centroids must be a 2-D array");
  }
  Codebook cb;
  cb.size = static_cast<std::size_t>(centroids.shape(0));
  cb.dim = static_cast<std::size_t>(centroids.shape(1));
  cb.centroids.assign(centroids.data(), centroids.data() + centroids.size());
  validate(cb);
  return cb;
}

py::array_t<float> matrix_to_numpy(const std::vector<float>& data, std::size_t rows,
                                   std::size_t cols) {
  return py::array_t<float>({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)},
                            data.data());
}

py::array_t<std::int32_t> codes_to_numpy(const std::vector<std::int32_t>& codes) {
  return py::array_t<std::int32_t>(static_cast<py::ssize_t>(codes.size()), codes.data());
}

LocalDistance local_distance_from(const std::string& name) {
  if (name == "angular") return LocalDistance::angular;
  if (name == "squared-euclidean") return LocalDistance::squared_euclidean;
  if (name == "code-mismatch") return LocalDistance::code_mismatch;
  throw Error(ErrorCategory::BadArgument, "unknown local distance '" + name + "'");
}

Normalization normalization_from(const std::string& name) {
  if (name == "sum") return Normalization::sum;
  if (name == "per-token") return Normalization::per_token;
  throw Error(ErrorCategory::BadArgument, "unknown normalization '" + name + "'");
}

py::dict encoded_to_dict(const DpdpResult& result) {
  py::dict d;
  d["utt_id"] = result.encoded.utt_id;
  d["frame_codes"] = codes_to_numpy(result.encoded.frame_codes);
  d["units"] = codes_to_numpy(result.encoded.units);
  d["durations"] = codes_to_numpy(result.encoded.durations);
  d["total_frames"] = result.encoded.total_frames;
  d["frame_rate_hz"] = result.encoded.frame_rate_hz;
  d["objective"] = result.objective_value;
  d["pruned"] = result.pruned;
  return d;
}

py::dict bitrate_to_dict(const BitrateReport& r) {
  py::dict d;
  d["units_per_sec"] = r.units_per_sec;
  d["bits_per_sec_fixed"] = r.bits_per_sec_fixed;
  d["bits_per_sec_entropy"] = r.bits_per_sec_entropy;
  d["total_units"] = r.total_units;
  d["total_seconds"] = r.total_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dpslm, m) {
  m.doc() = "Duration-penalized discrete speech units: quantization, "
            "segmentation, and per-bit evaluation";

  py::register_exception<Error>(m, "DpslmError");

  m.def("set_worker_threads", &set_worker_threads, py::arg("n"),
        "Cap the worker pool (0 = all cores). Never changes results.");

  // --- corpus-io ------------------------------------------------------------
  m.def(
      "load_features",
      [](const std::string& path) {
        const auto seq = load_features(path);
        return py::make_tuple(matrix_to_numpy(seq.data, seq.num_frames, seq.dim),
                              seq.frame_rate_hz, seq.utt_id);
      },
      py::arg("path"), "Returns (frames, frame_rate_hz, utt_id).");
  m.def(
      "store_features",
      [](const std::string& path, const FloatArray& frames, float rate,
         const std::string& utt_id) {
        store_features(to_sequence(frames, rate, utt_id), path);
      },
      py::arg("path"), py::arg("frames"), py::arg("frame_rate_hz") = 50.0f,
      py::arg("utt_id") = "utt");
  m.def(
      "load_codebook",
      [](const std::string& path) {
        const auto cb = load_codebook(path);
        return matrix_to_numpy(cb.centroids, cb.size, cb.dim);
      },
      py::arg("path"));
  m.def(
      "store_codebook",
      [](const std::string& path, const FloatArray& centroids) {
        store_codebook(to_codebook(centroids), path);
      },
      py::arg("path"), py::arg("centroids"));

  // --- kmeans -----------------------------------------------------------------
  m.def(
      "train_kmeans",
      [](const std::vector<FloatArray>& corpus, std::size_t k, int max_iters,
         int n_restarts, std::uint64_t seed, double sample_fraction,
         double convergence_tol) {
        std::vector<FeatureSequence> sequences;
        sequences.reserve(corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          sequences.push_back(to_sequence(corpus[i], 50.0f, "py" + std::to_string(i)));
        }
        KMeansConfig cfg;
        cfg.k = k;
        cfg.max_iters = max_iters;
        cfg.n_restarts = n_restarts;
        cfg.seed = seed;
        cfg.sample_fraction = sample_fraction;
        cfg.convergence_tol = convergence_tol;
        KMeansResult result;
        {
          py::gil_scoped_release release;
          result = train_codebook(sequences, cfg);
        }
        py::dict report;
        report["inertia_per_iter"] = result.report.inertia_per_iter;
        report["reseeds"] = result.report.reseeds;
        report["seed"] = result.report.seed;
        return py::make_tuple(
            matrix_to_numpy(result.codebook.centroids, result.codebook.size,
                            result.codebook.dim),
            report);
      },
      py::arg("corpus"), py::arg("k"), py::arg("max_iters") = 300,
      py::arg("n_restarts") = 1, py::arg("seed") = 0, py::arg("sample_fraction") = 1.0,
      py::arg("convergence_tol") = 0.0,
      "Trains a codebook on a list of [T, D] arrays; returns (centroids, report).");
  m.def(
      "assign_nearest",
      [](const FloatArray& frames, const FloatArray& centroids) {
        const auto seq = to_sequence(frames, 50.0f, "py");
        return codes_to_numpy(assign_nearest(seq, to_codebook(centroids)));
      },
      py::arg("frames"), py::arg("centroids"));
  m.def(
      "top_m_candidates",
      [](const FloatArray& frame, const FloatArray& centroids, std::size_t m) {
        if (frame.ndim() != 1) {
          throw Error(ErrorCategory::BadArgument, "frame must be a 1-D array");
        }
        std::vector<float> v(frame.data(), frame.data() + frame.size());
        return codes_to_numpy(top_m_candidates(v, to_codebook(centroids), m));
      },
      py::arg("frame"), py::arg("centroids"), py::arg("m"));

  // --- dpdp -------------------------------------------------------------------
  m.def(
      "dpdp_encode",
      [](const FloatArray& frames, const FloatArray& centroids, double lambda_,
         double prune_fraction, float frame_rate_hz, const std::string& utt_id) {
        const auto seq = to_sequence(frames, frame_rate_hz, utt_id);
        const auto cb = to_codebook(centroids);
        DpdpConfig cfg;
        cfg.lambda = lambda_;
        cfg.prune_fraction = prune_fraction;
        DpdpResult result;
        {
          py::gil_scoped_release release;
          result = dpdp_encode(seq, cb, cfg);
        }
        return encoded_to_dict(result);
      },
      py::arg("frames"), py::arg("centroids"), py::arg("lambda_") = 0.0,
      py::arg("prune_fraction") = 1.0, py::arg("frame_rate_hz") = 50.0f,
      py::arg("utt_id") = "utt",
      "Duration-penalized encoding of one utterance; returns a dict with "
      "frame_codes, units, durations and the objective value.");
  m.def(
      "deduplicate",
      [](const std::vector<std::int32_t>& codes) {
        auto [units, durations] = deduplicate(codes);
        return py::make_tuple(codes_to_numpy(units), codes_to_numpy(durations));
      },
      py::arg("frame_codes"));

  m.def(
      "encode_corpus",
      [](const std::string& manifest_path, const std::string& codebook_path,
         const std::string& out_units, double lambda_, double prune_fraction,
         const std::string& features_dir) {
        const auto manifest = load_manifest(manifest_path);
        const auto cb = load_codebook(codebook_path);
        const std::filesystem::path base =
            features_dir.empty() ? std::filesystem::path(manifest_path).parent_path()
                                 : std::filesystem::path(features_dir);
        DpdpConfig cfg;
        cfg.lambda = lambda_;
        cfg.prune_fraction = prune_fraction;
        EncodeSummary summary;
        {
          py::gil_scoped_release release;
          summary = encode_corpus_to_file(manifest, base, cb, cfg, out_units);
        }
        py::dict d;
        d["total_units"] = summary.total_units;
        d["total_frames"] = summary.total_frames;
        d["total_seconds"] = summary.total_seconds;
        d["units_per_sec"] = summary.units_per_sec;
        return d;
      },
      py::arg("manifest_path"), py::arg("codebook_path"), py::arg("out_units"),
      py::arg("lambda_") = 0.0, py::arg("prune_fraction") = 0.05,
      py::arg("features_dir") = "",
      "Encodes every utterance in a manifest into a units file.");

  // --- rate-metrics --------------------------------------------------------------
  m.def(
      "bitrate",
      [](const std::string& units_path, std::size_t k) {
        return bitrate_to_dict(bitrate(load_units(units_path), k));
      },
      py::arg("units_path"), py::arg("k"));
  m.def(
      "calibrate_lambda",
      [](const std::string& manifest_path, const std::string& codebook_path,
         double target_bits_per_sec, const std::string& rate_kind, double rel_tol,
         int max_evals, double prune_fraction, const std::string& features_dir) {
        const auto manifest = load_manifest(manifest_path);
        const auto cb = load_codebook(codebook_path);
        const std::filesystem::path base =
            features_dir.empty() ? std::filesystem::path(manifest_path).parent_path()
                                 : std::filesystem::path(features_dir);
        const auto corpus = load_corpus(manifest, base);
        const RateKind kind =
            rate_kind == "entropy" ? RateKind::entropy : RateKind::fixed;
        CalibrationResult result;
        {
          py::gil_scoped_release release;
          result = calibrate_lambda(corpus, cb, target_bits_per_sec, kind, rel_tol,
                                    max_evals, prune_fraction);
        }
        py::dict d;
        d["lambda"] = result.lambda;
        d["converged"] = result.converged;
        d["evals"] = result.evals;
        d["achieved"] = bitrate_to_dict(result.achieved);
        return d;
      },
      py::arg("manifest_path"), py::arg("codebook_path"), py::arg("target_bits_per_sec"),
      py::arg("rate_kind") = "fixed", py::arg("rel_tol") = 0.02,
      py::arg("max_evals") = 40, py::arg("prune_fraction") = 1.0,
      py::arg("features_dir") = "",
      "Bisection on lambda toward a target bitrate; returns the achieved report.");
  m.def(
      "sweep",
      [](const std::string& manifest_path, const std::string& codebook_path,
         int n_points, const std::string& rate_kind, double rel_tol, int max_evals,
         double prune_fraction, const std::string& features_dir) {
        const auto manifest = load_manifest(manifest_path);
        const auto cb = load_codebook(codebook_path);
        const std::filesystem::path base =
            features_dir.empty() ? std::filesystem::path(manifest_path).parent_path()
                                 : std::filesystem::path(features_dir);
        const auto corpus = load_corpus(manifest, base);
        const RateKind kind =
            rate_kind == "entropy" ? RateKind::entropy : RateKind::fixed;
        std::vector<SweepPoint> points;
        {
          py::gil_scoped_release release;
          points = sweep(corpus, cb, n_points, kind, rel_tol, max_evals, prune_fraction);
        }
        py::list out;
        for (const auto& p : points) {
          py::dict d;
          d["lambda"] = p.lambda;
          d["converged"] = p.converged;
          d["report"] = bitrate_to_dict(p.report);
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("manifest_path"), py::arg("codebook_path"), py::arg("n_points") = 6,
      py::arg("rate_kind") = "fixed", py::arg("rel_tol") = 0.02,
      py::arg("max_evals") = 40, py::arg("prune_fraction") = 1.0,
      py::arg("features_dir") = "",
      "Bitrate targets spaced from the lambda=0 rate down to half of it.");

  // --- eval-discrim ----------------------------------------------------------------
  m.def(
      "dtw",
      [](const FloatArray& a, const FloatArray& b, const std::string& local) {
        SegmentRepr sa, sb;
        if (a.ndim() != 2 || b.ndim() != 2) {
          throw Error(ErrorCategory::BadArgument, "segments must be 2-D arrays");
        }
        sa.n_steps = static_cast<std::size_t>(a.shape(0));
        sa.dim = static_cast<std::size_t>(a.shape(1));
        sa.steps.assign(a.data(), a.data() + a.size());
        sa.codes.assign(sa.n_steps, 0);
        sb.n_steps = static_cast<std::size_t>(b.shape(0));
        sb.dim = static_cast<std::size_t>(b.shape(1));
        sb.steps.assign(b.data(), b.data() + b.size());
        sb.codes.assign(sb.n_steps, 0);
        DtwConfig cfg;
        cfg.local_distance = local_distance_from(local);
        return dtw_cost(sa, sb, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("local_distance") = "angular",
      "Normalized DTW alignment cost of two step-vector sequences.");
  m.def(
      "abx",
      [](const std::string& items_path, const std::string& units_path,
         const std::string& codebook_path, const std::string& local, bool per_frame) {
        const auto items = load_items(items_path);
        const auto units = load_units(units_path);
        const auto cb = load_codebook(codebook_path);
        DtwConfig cfg;
        cfg.local_distance = local_distance_from(local);
        AbxReport report;
        {
          py::gil_scoped_release release;
          report = abx_score(items, units, cb, cfg, per_frame);
        }
        py::dict d;
        d["abx_error"] = report.error;
        py::list cells;
        for (const auto& cell : report.cells) {
          py::dict c;
          c["speaker"] = cell.speaker;
          c["label_a"] = cell.label_a;
          c["label_b"] = cell.label_b;
          c["score"] = cell.score;
          c["n_triples"] = cell.n_triples;
          cells.append(std::move(c));
        }
        d["cells"] = std::move(cells);
        return d;
      },
      py::arg("items_path"), py::arg("units_path"), py::arg("codebook_path"),
      py::arg("local_distance") = "angular", py::arg("per_frame") = false);
  m.def(
      "same_different",
      [](const std::string& items_path, const std::string& units_path,
         const std::string& codebook_path, const std::string& local,
         const std::string& pairing, bool per_frame) {
        const auto items = load_items(items_path);
        const auto units = load_units(units_path);
        const auto cb = load_codebook(codebook_path);
        DtwConfig cfg;
        cfg.local_distance = local_distance_from(local);
        SameDiffConfig sd;
        if (pairing == "across-speaker-only") {
          sd.pairing = Pairing::across_speaker_only;
        } else if (pairing != "all-pairs") {
          throw Error(ErrorCategory::BadArgument, "unknown pairing '" + pairing + "'");
        }
        SameDiffReport report;
        {
          py::gil_scoped_release release;
          report = same_different_ap(items, units, cb, cfg, sd, per_frame);
        }
        py::dict d;
        d["ap"] = report.ap;
        d["n_pairs"] = report.n_pairs;
        d["n_ties"] = report.n_ties;
        d["pr_curve"] = report.pr_curve;
        return d;
      },
      py::arg("items_path"), py::arg("units_path"), py::arg("codebook_path"),
      py::arg("local_distance") = "angular", py::arg("pairing") = "all-pairs",
      py::arg("per_frame") = false);

  // --- unit-lm ------------------------------------------------------------------------
  py::class_<NgramModel>(m, "NgramModel")
      .def_static(
          "train",
          [](const std::vector<std::vector<std::int32_t>>& sequences, std::size_t k,
             int order, double discount) {
            NgramConfig cfg;
            cfg.order = order;
            cfg.discount = discount;
            return NgramModel::train(sequences, k, cfg);
          },
          py::arg("sequences"), py::arg("k"), py::arg("order") = 5,
          py::arg("discount") = 0.75)
      .def_static("load", &NgramModel::load, py::arg("path"))
      .def("save", &NgramModel::save, py::arg("path"))
      .def(
          "prob",
          [](const NgramModel& model, const std::vector<std::int32_t>& context,
             std::int32_t symbol) { return model.prob(context, symbol); },
          py::arg("context"), py::arg("symbol"))
      .def(
          "score",
          [](const NgramModel& model, const std::vector<std::int32_t>& units,
             const std::string& normalization) {
            return model.score_sequence(units, normalization_from(normalization));
          },
          py::arg("units"), py::arg("normalization") = "per-token")
      .def_property_readonly("order", &NgramModel::order)
      .def_property_readonly("vocab_size", &NgramModel::vocab_size)
      .def_property_readonly("eos_symbol", &NgramModel::eos_symbol)
      .def_property_readonly("bos_symbol", &NgramModel::bos_symbol);

#ifdef DPSLM_VERSION
  m.attr("__version__") = DPSLM_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
