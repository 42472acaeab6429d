#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace artrecon {

/// Where completions come from: the ground-truth quantizer, a file replayed
/// verbatim, or an HTTP endpoint speaking `{"prompt"}` -> `{"completion"}`.
struct PredictorSpec {
  enum class Kind { Oracle, File, Http };
  Kind kind = Kind::Oracle;
  /// File path or URL; empty for the oracle.
  std::string target;

  /// "oracle", "file:PATH" or "http:URL" (the URL keeps its scheme, so
  /// "http:http://host:port/path" and "http://host:port/path" both work).
  static PredictorSpec parse(std::string_view text);
  std::string to_string() const;
};

/// Prompt -> completion, used by the oracle kind.
using OracleFn = std::function<std::string(const std::string& prompt)>;

struct PredictorOptions {
  double timeout_seconds = 30.0;
  int retries = 2;
  double backoff_base_seconds = 0.5;
  double backoff_factor = 2.0;
  /// Upper bound on concurrent HTTP requests through one client.
  int max_in_flight = 1;
};

class PredictorClient {
 public:
  /// Throws InvalidArgument for a non-positive timeout or negative retry count.
  PredictorClient(PredictorSpec spec, PredictorOptions options = {});
  ~PredictorClient();
  PredictorClient(PredictorClient&&) noexcept;
  PredictorClient& operator=(PredictorClient&&) noexcept;

  const PredictorSpec& spec() const { return spec_; }
  const PredictorOptions& options() const { return options_; }

  /// Throws InvalidArgument for an empty prompt, PredictorUnavailable when
  /// the oracle has no ground truth, the file cannot be read or every HTTP
  /// attempt failed (the message lists each attempt), MalformedResponse
  /// when the body is not `{"completion": <string>}`.
  std::string predict(const std::string& prompt, const OracleFn& oracle = {}) const;

  /// Delays slept between HTTP attempts, for tests and logs.
  std::vector<double> backoff_schedule() const;

 private:
  std::string predict_http(const std::string& prompt) const;

  struct Gate;
  PredictorSpec spec_;
  PredictorOptions options_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace artrecon
