#include "aggdiff/aggdiff.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "aggdiff/entropy.hpp"
#include "aggdiff/error.hpp"
#include "aggdiff/experiment.hpp"
#include "aggdiff/fields.hpp"
#include "aggdiff/kernels.hpp"

struct aggdiff_kernel {
  aggdiff::InteractionKernel kernel;
};

struct aggdiff_field {
  aggdiff::DensityField field;
};

struct aggdiff_scenario {
  aggdiff::ScenarioConfig config;
};

namespace {

thread_local std::string last_error;

aggdiff_status record(aggdiff_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class F>
aggdiff_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return AGGDIFF_OK;
  } catch (const aggdiff::Error& e) {
    return record(static_cast<aggdiff_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return record(AGGDIFF_ERR_MEMORY_CAP, "out of memory");
  } catch (const std::exception& e) {
    return record(AGGDIFF_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(AGGDIFF_ERR_INTERNAL, "unknown failure");
  }
}

void check_ptr(const void* p, const char* name) {
  aggdiff::require(p != nullptr, aggdiff::ErrorCode::invalid_argument, std::string(name) + " is null");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill_outcome(const aggdiff::SweepResult& res, aggdiff_outcome* outcome) {
  if (!outcome) return;
  *outcome = {};
  for (const auto& r : res.runs) {
    ++outcome->runs;
    if (r.series.status == aggdiff::RunStatus::completed) ++outcome->completed;
    if (r.classification == aggdiff::Classification::blowup) ++outcome->blowups;
    if (r.classification == aggdiff::Classification::inconclusive) ++outcome->inconclusive;
    if (r.note.rfind("run failed", 0) == 0) ++outcome->failed;
  }
}

}  // namespace

extern "C" {

AGGDIFF_API const char* aggdiff_version(void) { return "1.0.0"; }

AGGDIFF_API const char* aggdiff_last_error(void) { return last_error.c_str(); }

AGGDIFF_API void aggdiff_string_free(char* s) { std::free(s); }

AGGDIFF_API aggdiff_status aggdiff_kernel_create(aggdiff_kernel_family family, int dim, double param1,
                                                 double param2, aggdiff_kernel** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    using aggdiff::InteractionKernel;
    switch (family) {
      case AGGDIFF_KERNEL_NEWTONIAN: *out = new aggdiff_kernel{InteractionKernel::newtonian(dim)}; break;
      case AGGDIFF_KERNEL_BESSEL: *out = new aggdiff_kernel{InteractionKernel::bessel(dim, param1)}; break;
      case AGGDIFF_KERNEL_GAUSSIAN: *out = new aggdiff_kernel{InteractionKernel::gaussian(dim, param1)}; break;
      case AGGDIFF_KERNEL_POWER_DECAY:
        *out = new aggdiff_kernel{InteractionKernel::power_decay(dim, param1, param2)};
        break;
      default: aggdiff::fail(aggdiff::ErrorCode::invalid_argument, "unknown kernel family");
    }
  });
}

AGGDIFF_API aggdiff_status aggdiff_kernel_create_tabulated(int dim, const double* r, const double* k_prime,
                                                           size_t n, aggdiff_kernel** out) {
  return guarded([&] {
    check_ptr(out, "out");
    check_ptr(r, "r");
    check_ptr(k_prime, "k_prime");
    *out = nullptr;
    *out = new aggdiff_kernel{aggdiff::InteractionKernel::tabulated(dim, std::vector<double>(r, r + n),
                                                                   std::vector<double>(k_prime, k_prime + n))};
  });
}

AGGDIFF_API aggdiff_status aggdiff_kernel_load_csv(const char* path, int dim, aggdiff_kernel** out) {
  return guarded([&] {
    check_ptr(out, "out");
    check_ptr(path, "path");
    *out = nullptr;
    *out = new aggdiff_kernel{aggdiff::load_tabulated_kernel(path, dim)};
  });
}

AGGDIFF_API void aggdiff_kernel_destroy(aggdiff_kernel* k) { delete k; }

AGGDIFF_API aggdiff_status aggdiff_kernel_gradient(const aggdiff_kernel* k, double r, double* out) {
  return guarded([&] {
    check_ptr(k, "kernel");
    check_ptr(out, "out");
    *out = k->kernel.gradient(r);
  });
}

AGGDIFF_API aggdiff_status aggdiff_kernel_lq_norm(const aggdiff_kernel* k, double q, double* value,
                                                  int* divergent) {
  return guarded([&] {
    check_ptr(k, "kernel");
    check_ptr(value, "value");
    auto norm = aggdiff::lq_gradient_norm(k->kernel, q);
    *value = norm.divergent ? std::nan("") : norm.value;
    if (divergent) *divergent = norm.divergent ? 1 : 0;
  });
}

AGGDIFF_API aggdiff_status aggdiff_field_create(int dim, int cells, double r_max, const double* values,
                                                aggdiff_field** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    auto grid = aggdiff::make_grid(dim, cells, r_max);
    std::vector<double> v(static_cast<std::size_t>(cells), 0.0);
    if (values) v.assign(values, values + cells);
    *out = new aggdiff_field{aggdiff::DensityField(grid, std::move(v))};
  });
}

AGGDIFF_API aggdiff_status aggdiff_field_read_csv(const char* path, int dim, aggdiff_field** out) {
  return guarded([&] {
    check_ptr(out, "out");
    check_ptr(path, "path");
    *out = nullptr;
    *out = new aggdiff_field{aggdiff::read_snapshot_csv(path, dim)};
  });
}

AGGDIFF_API aggdiff_status aggdiff_field_write_csv(const aggdiff_field* f, const char* path) {
  return guarded([&] {
    check_ptr(f, "field");
    check_ptr(path, "path");
    aggdiff::write_snapshot_csv(f->field, path);
  });
}

AGGDIFF_API size_t aggdiff_field_size(const aggdiff_field* f) {
  return f ? static_cast<size_t>(f->field.size()) : 0;
}

AGGDIFF_API aggdiff_status aggdiff_field_values(const aggdiff_field* f, double* out, size_t n) {
  return guarded([&] {
    check_ptr(f, "field");
    check_ptr(out, "out");
    auto v = f->field.values();
    std::size_t count = std::min(n, v.size());
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(count), out);
  });
}

AGGDIFF_API aggdiff_status aggdiff_field_mass(const aggdiff_field* f, double* out) {
  return guarded([&] {
    check_ptr(f, "field");
    check_ptr(out, "out");
    *out = aggdiff::mass(f->field);
  });
}

AGGDIFF_API void aggdiff_field_destroy(aggdiff_field* f) { delete f; }

AGGDIFF_API aggdiff_status aggdiff_entropy_audit(const aggdiff_field* f, double mass, const char* source,
                                                 char** json) {
  return guarded([&] {
    check_ptr(f, "field");
    check_ptr(json, "json");
    *json = nullptr;
    auto report = aggdiff::entropy_report(f->field, mass);
    *json = duplicate(aggdiff::entropy_report_json(source ? source : "", report));
  });
}

AGGDIFF_API aggdiff_status aggdiff_fit_jsonl(const char* path, const char* series, double lo, double hi,
                                             aggdiff_fit* out) {
  return guarded([&] {
    check_ptr(path, "path");
    check_ptr(series, "series");
    check_ptr(out, "out");
    auto diag = aggdiff::read_diagnostics_jsonl(path);
    auto t = aggdiff::series_column(diag, "t");
    auto y = aggdiff::series_column(diag, series);
    auto fit = aggdiff::fit_rate(t, y, lo, hi);
    *out = {fit.exponent, fit.intercept, fit.r2, fit.stderr_, fit.samples};
  });
}

AGGDIFF_API aggdiff_status aggdiff_scenario_load(const char* path, aggdiff_scenario** out) {
  return guarded([&] {
    check_ptr(out, "out");
    check_ptr(path, "path");
    *out = nullptr;
    *out = new aggdiff_scenario{aggdiff::load_scenario(path)};
  });
}

AGGDIFF_API aggdiff_status aggdiff_scenario_parse(const char* text, const char* origin, aggdiff_scenario** out) {
  return guarded([&] {
    check_ptr(out, "out");
    check_ptr(text, "text");
    *out = nullptr;
    auto doc = aggdiff::config::Document::parse(text, origin ? origin : "<config>");
    *out = new aggdiff_scenario{aggdiff::parse_scenario(doc)};
  });
}

AGGDIFF_API aggdiff_status aggdiff_scenario_set_output_dir(aggdiff_scenario* s, const char* dir) {
  return guarded([&] {
    check_ptr(s, "scenario");
    s->config.output_dir = dir ? dir : "";
  });
}

AGGDIFF_API void aggdiff_scenario_destroy(aggdiff_scenario* s) { delete s; }

AGGDIFF_API aggdiff_status aggdiff_scenario_run(const aggdiff_scenario* s, aggdiff_outcome* outcome,
                                                char** summary_json) {
  return guarded([&] {
    check_ptr(s, "scenario");
    if (summary_json) *summary_json = nullptr;
    auto res = aggdiff::run_scenario(s->config);
    fill_outcome(res, outcome);
    if (summary_json) *summary_json = duplicate(aggdiff::sweep_summary_json(s->config, res));
  });
}

AGGDIFF_API aggdiff_status aggdiff_scenario_sweep(const aggdiff_scenario* s, aggdiff_outcome* outcome,
                                                  char** summary_json) {
  return guarded([&] {
    check_ptr(s, "scenario");
    if (summary_json) *summary_json = nullptr;
    auto res = aggdiff::lambda_sweep(s->config);
    fill_outcome(res, outcome);
    if (summary_json) *summary_json = duplicate(aggdiff::sweep_summary_json(s->config, res));
  });
}

}  // extern "C"
