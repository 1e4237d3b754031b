#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cyclevc/cli.hpp"
#include "cyclevc/config.hpp"
#include "cyclevc/gradcheck.hpp"
#include "cyclevc/losses.hpp"
#include "cyclevc/metrics.hpp"
#include "cyclevc/model.hpp"
#include "cyclevc/ops.hpp"
#include "cyclevc/synth.hpp"
#include "cyclevc/training.hpp"

namespace py = pybind11;
using namespace cyclevc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid grid_from_array(const Array& a) {
  const auto info = a.request();
  Shape s;
  if (info.ndim == 4) {
    s = {static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1]),
         static_cast<int>(info.shape[2]), static_cast<int>(info.shape[3])};
  } else if (info.ndim == 2) {
    s = {1, 1, static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1])};
  } else if (info.ndim == 1) {
    s = {1, static_cast<int>(info.shape[0]), 1, 1};  // per-channel vector
  } else {
    throw ValidationError("expected a 1-D, 2-D (Q x T) or 4-D (N,C,H,W) array");
  }
  Grid g(s);
  const double* src = static_cast<const double*>(info.ptr);
  std::copy(src, src + g.v.size(), g.v.begin());
  return g;
}

py::array grid_to_array(const Grid& g) {
  Array out({g.shape.n, g.shape.c, g.shape.h, g.shape.w});
  std::copy(g.v.begin(), g.v.end(), static_cast<double*>(out.request().ptr));
  return out;
}

FeatureSequence seq_from_array(const Array& a) {
  const auto info = a.request();
  if (info.ndim != 2) throw ValidationError("expected a 2-D (Q x T) array");
  FeatureSequence f(static_cast<int>(info.shape[0]), static_cast<int>(info.shape[1]));
  const double* src = static_cast<const double*>(info.ptr);
  std::copy(src, src + f.values.size(), f.values.begin());
  return f;
}

py::array seq_to_array(const FeatureSequence& f) {
  Array out({f.q, f.t});
  std::copy(f.values.begin(), f.values.end(), static_cast<double*>(out.request().ptr));
  return out;
}

}  // namespace

PYBIND11_MODULE(_cyclevc, m) {
  m.doc() = "non-parallel Mel-cepstral sequence conversion core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ComputeError>(m, "ComputeError", PyExc_RuntimeError);

  // --- differentiable ops on (N,C,H,W) arrays
  m.def(
      "conv2d",
      [](const Array& x, const Array& kernel, const Array& bias, int sh, int sw,
         int ph, int pw) {
        const Grid xg = grid_from_array(x);
        const Grid kg = grid_from_array(kernel);
        Grid bg = grid_from_array(bias);
        bg.shape = {1, static_cast<int>(bg.shape.numel()), 1, 1};
        ops::ConvSpec p{kg.shape.c, kg.shape.n, kg.shape.h, kg.shape.w, sh, sw, ph, pw};
        Grid y;
        ops::conv2d_forward(xg, kg, bg, p, y);
        return grid_to_array(y);
      },
      py::arg("x"), py::arg("kernel"), py::arg("bias"), py::arg("sh") = 1,
      py::arg("sw") = 1, py::arg("ph") = 0, py::arg("pw") = 0);

  m.def("glu", [](const Array& x) {
    Grid y;
    ops::glu_forward(grid_from_array(x), y);
    return grid_to_array(y);
  });

  m.def(
      "instance_norm",
      [](const Array& x, const Array& gamma, const Array& beta, double eps) {
        Grid gg = grid_from_array(gamma), bg = grid_from_array(beta);
        gg.shape = {1, static_cast<int>(gg.shape.numel()), 1, 1};
        bg.shape = {1, static_cast<int>(bg.shape.numel()), 1, 1};
        Grid y;
        ops::instance_norm_forward(grid_from_array(x), gg, bg, eps, y);
        return grid_to_array(y);
      },
      py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-5);

  m.def(
      "pixel_shuffle",
      [](const Array& x, int rh, int rw) {
        Grid y;
        ops::pixel_shuffle_forward(grid_from_array(x), rh, rw, y);
        return grid_to_array(y);
      },
      py::arg("x"), py::arg("rh"), py::arg("rw"));

  m.def("grad_check_all", [](std::uint64_t seed) {
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& r : grad_check_all(seed)) rows.emplace_back(r.name, r.max_rel_err);
    return rows;
  });

  // --- models
  py::class_<Generator>(m, "Generator")
      .def(py::init([](const std::string& kind, int q, int base_channels, int n_res,
                       std::uint64_t seed) {
             GeneratorSpec spec{parse_generator_kind(kind), q, base_channels, n_res};
             return new Generator(spec, seed);
           }),
           py::arg("kind"), py::arg("q"), py::arg("base_channels") = 64,
           py::arg("n_res") = 6, py::arg("seed") = 1)
      .def("forward",
           [](const Generator& g, const Array& x) {
             return seq_to_array(generator_forward(g, seq_from_array(x)));
           })
      .def_property_readonly("n_parameters", [](const Generator& g) {
        return g.params().total_parameters();
      });

  py::class_<Discriminator>(m, "Discriminator")
      .def(py::init([](const std::string& kind, int q, int base_channels, int t_ref,
                       std::uint64_t seed) {
             DiscriminatorSpec spec{parse_discriminator_kind(kind), q, base_channels,
                                    t_ref};
             return new Discriminator(spec, seed);
           }),
           py::arg("kind"), py::arg("q"), py::arg("base_channels") = 64,
           py::arg("t_ref") = 128, py::arg("seed") = 1)
      .def("forward",
           [](const Discriminator& d, const Array& x) {
             return grid_to_array(discriminator_forward(d, seq_from_array(x)));
           })
      .def_property_readonly("n_parameters", [](const Discriminator& d) {
        return d.params().total_parameters();
      });

  // --- losses
  m.def("lsgan_d_loss", [](const Array& real, const Array& fake) {
    return lsgan_d_loss(grid_from_array(real), grid_from_array(fake));
  });
  m.def("lsgan_g_loss",
        [](const Array& fake) { return lsgan_g_loss(grid_from_array(fake)); });
  m.def("cycle_loss", [](const Array& x, const Array& xc, const Array& y,
                         const Array& yc) {
    return cycle_loss(seq_from_array(x), seq_from_array(xc), seq_from_array(y),
                      seq_from_array(yc));
  });
  m.def("identity_loss", [](const Array& y, const Array& gy, const Array& x,
                            const Array& gx) {
    return identity_loss(seq_from_array(y), seq_from_array(gy), seq_from_array(x),
                         seq_from_array(gx));
  });

  // --- features
  m.def("read_features",
        [](const std::string& path) { return seq_to_array(read_features(path)); });
  m.def("write_features", [](const std::string& path, const Array& f) {
    write_features(path, seq_from_array(f));
  });
  m.def("differential_mceps", [](const Array& src, const Array& conv) {
    return seq_to_array(differential_mceps(seq_from_array(src), seq_from_array(conv)));
  });
  m.def(
      "convert_f0",
      [](double logf0, double src_mean, double src_std, double tgt_mean,
         double tgt_std) {
        NormStats s, t;
        s.logf0_mean = src_mean;
        s.logf0_std = src_std;
        t.logf0_mean = tgt_mean;
        t.logf0_std = tgt_std;
        return convert_f0(logf0, s, t);
      },
      py::arg("logf0"), py::arg("src_mean"), py::arg("src_std"), py::arg("tgt_mean"),
      py::arg("tgt_std"));

  // --- metrics
  m.def("mcd", [](const Array& converted, const Array& target) {
    return mcd_utterance(seq_from_array(converted), seq_from_array(target));
  });
  m.def("msd", [](const Array& converted, const Array& target) {
    return msd(seq_from_array(converted), seq_from_array(target));
  });
  m.def("dtw_align", [](const Array& converted, const Array& target) {
    return dtw_align(seq_from_array(converted), seq_from_array(target)).steps;
  });

  // --- pipeline entry points
  m.def("train", [](const std::string& config_path) { cli::run_train(config_path); });
  m.def(
      "convert",
      [](const std::string& checkpoint, const std::string& input,
         const std::string& out_dir, const std::string& direction, bool differential) {
        cli::ConvertOptions opt;
        opt.checkpoint = checkpoint;
        opt.input = input;
        opt.out_dir = out_dir;
        opt.direction = direction;
        opt.differential = differential;
        cli::run_convert(opt);
      },
      py::arg("checkpoint"), py::arg("input"), py::arg("out_dir"),
      py::arg("direction") = "xy", py::arg("differential") = false);
  m.def("evaluate", [](const std::string& converted_dir, const std::string& target_dir,
                       const std::string& pairs, const std::string& out_path) {
    cli::run_evaluate(converted_dir, target_dir, pairs, out_path);
  });
  m.def("synth", [](const std::string& spec_path, const std::string& out_dir) {
    cli::run_synth(spec_path, out_dir);
  });
}
