#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fishctl/assess.hpp"
#include "fishctl/config.hpp"
#include "fishctl/hjb.hpp"
#include "fishctl/model.hpp"
#include "fishctl/net.hpp"
#include "fishctl/quantize.hpp"
#include "fishctl/sdp.hpp"
#include "fishctl/train.hpp"

namespace py = pybind11;
using namespace fishctl;

namespace {

using MutPolicyPtr = std::shared_ptr<PolicyField>;

MutPolicyPtr unconst(PolicyPtr p) { return std::const_pointer_cast<PolicyField>(std::move(p)); }

}  // namespace

PYBIND11_MODULE(_fishctl, m) {
  m.doc() = "quota-policy solvers for the controlled multi-species logistic SDE";

  py::register_exception<SimulationDiverged>(m, "SimulationDivergedError", PyExc_RuntimeError);
  py::register_exception<ResourceLimit>(m, "ResourceLimitError", PyExc_RuntimeError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("d", &ModelConfig::d)
      .def_readwrite("r", &ModelConfig::r)
      .def_readwrite("kappa", &ModelConfig::kappa)
      .def_readwrite("sigma", &ModelConfig::sigma)
      .def_readwrite("alpha", &ModelConfig::alpha)
      .def_readwrite("beta", &ModelConfig::beta)
      .def_readwrite("x_desired", &ModelConfig::x_desired)
      .def_readwrite("horizon", &ModelConfig::horizon)
      .def_readwrite("u_min", &ModelConfig::u_min)
      .def_readwrite("u_max", &ModelConfig::u_max)
      .def_readwrite("steps", &ModelConfig::steps)
      .def_readwrite("samples", &ModelConfig::samples)
      .def("h", &ModelConfig::h)
      .def("validate", &ModelConfig::validate);
  m.def("load_config", &load_config);
  m.def("config_from_string", &config_from_string);
  m.def("config_to_string", &config_to_string);

  py::class_<PolicyField, MutPolicyPtr>(m, "PolicyField")
      .def("__call__",
           [](const PolicyField& p, std::vector<double> x, double t) {
             return p(std::span<const double>(x.data(), x.size()), t);
           })
      .def("dim", &PolicyField::dim)
      .def("backing", &PolicyField::backing);
  m.def("constant_policy", [](std::vector<double> u, double lo, double hi) -> MutPolicyPtr {
    return std::make_shared<ConstantPolicy>(std::move(u), lo, hi);
  });

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("d", &Trajectory::d)
      .def_readonly("steps", &Trajectory::steps)
      .def_readonly("states", &Trajectory::states)
      .def_readonly("controls", &Trajectory::controls)
      .def_readonly("cost_tracking", &Trajectory::cost_tracking)
      .def_readonly("cost_quota", &Trajectory::cost_quota)
      .def_readonly("cost_variation", &Trajectory::cost_variation)
      .def_readonly("total_cost", &Trajectory::total_cost);
  m.def(
      "simulate",
      [](const ModelConfig& cfg, const MutPolicyPtr& pol, std::vector<double> x0, uint64_t seed,
         bool common) {
        NoisePath np = make_noise(cfg, seed, common);
        return simulate(cfg, *pol, x0, np);
      },
      py::arg("cfg"), py::arg("policy"), py::arg("x0"), py::arg("seed"),
      py::arg("common_noise") = false);

  py::class_<McCost>(m, "McCost")
      .def_readonly("mean", &McCost::mean)
      .def_readonly("stderr", &McCost::stderr_)
      .def_readonly("samples", &McCost::samples);
  m.def(
      "mc_cost",
      [](const ModelConfig& cfg, const MutPolicyPtr& pol, std::vector<double> x0,
         std::vector<uint64_t> seeds, int threads) {
        return mc_cost(cfg, *pol, x0, seeds, threads);
      },
      py::arg("cfg"), py::arg("policy"), py::arg("x0"), py::arg("seeds"), py::arg("threads") = 1);

  py::class_<QuantGrid>(m, "QuantGrid")
      .def_readonly("dim", &QuantGrid::dim)
      .def_readonly("order", &QuantGrid::order)
      .def_readonly("nodes", &QuantGrid::nodes)
      .def_readonly("weights", &QuantGrid::weights);
  m.def("generate_1d", &generate_1d);
  m.def("product_grid", &product_grid);

  py::class_<SdpOptions>(m, "SdpOptions")
      .def(py::init<>())
      .def_readwrite("grid_points", &SdpOptions::grid_points)
      .def_readwrite("domain", &SdpOptions::domain)
      .def_readwrite("golden_iters", &SdpOptions::golden_iters)
      .def_readwrite("control_levels", &SdpOptions::control_levels);
  py::class_<ValueControlGrid>(m, "ValueControlGrid")
      .def_readonly("grid_points", &ValueControlGrid::grid_points)
      .def_readonly("domain", &ValueControlGrid::domain)
      .def_readonly("time_steps", &ValueControlGrid::time_steps)
      .def_readonly("values", &ValueControlGrid::values)
      .def_readonly("controls", &ValueControlGrid::controls);
  m.def("sdp_solve", &sdp_solve);
  m.def("sdp_policy", [](const ValueControlGrid& g) { return unconst(sdp_policy(g)); });

  py::class_<HjbGridSpec>(m, "HjbGridSpec")
      .def(py::init<>())
      .def_readwrite("shape", &HjbGridSpec::shape)
      .def_readwrite("domain", &HjbGridSpec::domain)
      .def_readwrite("time_steps", &HjbGridSpec::time_steps)
      .def_readwrite("memory_budget", &HjbGridSpec::memory_budget);
  py::class_<HjbGrid>(m, "HjbGrid")
      .def_readonly("d", &HjbGrid::d)
      .def_readonly("shape", &HjbGrid::shape)
      .def_readonly("time_steps", &HjbGrid::time_steps)
      .def_readonly("values", &HjbGrid::values)
      .def_readonly("controls", &HjbGrid::controls);
  m.def("hjb_solve", &hjb_solve);
  m.def("hjb_policy", [](const HjbGrid& g) { return unconst(hjb_policy(g)); });

  py::class_<NetSpec>(m, "NetSpec")
      .def(py::init<>())
      .def_readwrite("d", &NetSpec::d)
      .def_readwrite("hidden", &NetSpec::hidden)
      .def_readwrite("domain", &NetSpec::domain)
      .def_readwrite("horizon", &NetSpec::horizon)
      .def_readwrite("u_min", &NetSpec::u_min)
      .def_readwrite("u_max", &NetSpec::u_max);
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("iters", &TrainConfig::iters)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def_readwrite("eval_batch", &TrainConfig::eval_batch)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_readwrite("cg_iters", &TrainConfig::cg_iters);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("theta", &TrainResult::theta)
      .def_readonly("loss_history", &TrainResult::loss_history)
      .def_readonly("eval_history", &TrainResult::eval_history)
      .def_readonly("grad_norms", &TrainResult::grad_norms)
      .def_readonly("best_eval", &TrainResult::best_eval)
      .def_readonly("iterations", &TrainResult::iterations);
  m.def("train_adam", &train_adam);
  m.def("train_cg", &train_cg);
  m.def("network_policy", [](const NetSpec& spec, std::vector<double> theta) -> MutPolicyPtr {
    return std::make_shared<NetworkPolicy>(spec, std::move(theta));
  });
  m.def("load_checkpoint", &load_checkpoint);
  m.def("save_checkpoint", [](const NetSpec& spec, std::vector<double> theta,
                              const std::string& path) { save_checkpoint(spec, theta, path); });

  py::class_<OracleSpec>(m, "OracleSpec")
      .def(py::init<>())
      .def_readwrite("d", &OracleSpec::d)
      .def_readwrite("kappa", &OracleSpec::kappa)
      .def_readwrite("y_target", &OracleSpec::y_target)
      .def_readwrite("common_noise", &OracleSpec::common_noise)
      .def_property(
          "one_d_policy", [](const OracleSpec& s) { return unconst(s.one_d_policy); },
          [](OracleSpec& s, MutPolicyPtr p) { s.one_d_policy = std::move(p); });
  py::class_<Threshold>(m, "Threshold")
      .def_readonly("has_switch", &Threshold::has_switch)
      .def_readonly("location", &Threshold::location)
      .def_readonly("slope", &Threshold::slope)
      .def_readonly("level", &Threshold::level);
  m.def("lift_policy", [](const OracleSpec& s) { return unconst(lift_policy(s)); });
  m.def("verify_commutation", &verify_commutation);
  m.def("predict_thresholds",
        [](std::vector<double> kappa, int d, int axis, std::vector<double> fixed, double y_star,
           double domain) {
          return predict_thresholds(kappa, d, axis, fixed, y_star, domain);
        },
        py::arg("kappa"), py::arg("d"), py::arg("axis"), py::arg("fixed"),
        py::arg("y_star") = 1.0, py::arg("domain") = 3.0);
  m.def("compare_policies",
        [](const ModelConfig& cfg, std::vector<std::pair<std::string, MutPolicyPtr>> pols,
           std::vector<std::vector<double>> x0s, int K, uint64_t seed, int threads) {
          std::vector<std::pair<std::string, PolicyPtr>> cp;
          for (auto& [n, p] : pols) cp.emplace_back(n, std::move(p));
          auto table = compare_policies(cfg, cp, x0s, K, seed, threads);
          py::list out;
          for (const auto& c : table) {
            py::dict row;
            row["policy"] = c.policy;
            row["x0"] = c.x0;
            row["mean"] = c.mean;
            row["stderr"] = c.stderr_;
            row["ok"] = c.ok;
            row["error"] = c.error;
            out.append(row);
          }
          return out;
        },
        py::arg("cfg"), py::arg("policies"), py::arg("x0s"), py::arg("K"), py::arg("seed"),
        py::arg("threads") = 1);
}
