#include "artrecon/predictor.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "artrecon/error.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/numfmt.hpp"

// Last: it pulls in <resolv.h>, whose `_res` macro breaks Eigen headers.
#include <httplib.h>

namespace artrecon {

PredictorSpec PredictorSpec::parse(std::string_view text) {
  if (text == "oracle") return {Kind::Oracle, {}};
  if (text.starts_with("file:")) {
    std::string path(text.substr(5));
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, "predictor 'file:' needs a path");
    return {Kind::File, path};
  }
  if (text.starts_with("http://")) return {Kind::Http, std::string(text)};
  if (text.starts_with("http:")) {
    std::string url(text.substr(5));
    if (!url.starts_with("http://")) url = "http://" + url;
    return {Kind::Http, url};
  }
  throw Error(ErrorCode::InvalidArgument,
              "predictor must be 'oracle', 'file:PATH' or 'http:URL', got '" + std::string(text) + "'");
}

std::string PredictorSpec::to_string() const {
  switch (kind) {
    case Kind::Oracle:
      return "oracle";
    case Kind::File:
      return "file:" + target;
    case Kind::Http:
      return "http:" + target;
  }
  return {};
}

// Counting gate bounding in-flight HTTP requests.
struct PredictorClient::Gate {
  std::mutex mutex;
  std::condition_variable cv;
  int free = 1;
};

namespace {

class InFlight {
 public:
  template <typename G>
  explicit InFlight(G& gate) : mutex_(gate.mutex), cv_(gate.cv), free_(gate.free) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  ~InFlight() {
    {
      std::lock_guard lock(mutex_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex& mutex_;
  std::condition_variable& cv_;
  int& free_;
};

}  // namespace

PredictorClient::PredictorClient(PredictorSpec spec, PredictorOptions options)
    : spec_(std::move(spec)), options_(options), gate_(std::make_unique<Gate>()) {
  if (!(options_.timeout_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "predictor timeout must be positive");
  if (options_.retries < 0) throw Error(ErrorCode::InvalidArgument, "predictor retry count must be non-negative");
  if (options_.backoff_base_seconds < 0.0 || options_.backoff_factor < 1.0)
    throw Error(ErrorCode::InvalidArgument, "predictor backoff must be non-negative with factor >= 1");
  gate_->free = std::max(options_.max_in_flight, 1);
}

PredictorClient::~PredictorClient() = default;
PredictorClient::PredictorClient(PredictorClient&&) noexcept = default;
PredictorClient& PredictorClient::operator=(PredictorClient&&) noexcept = default;

std::vector<double> PredictorClient::backoff_schedule() const {
  std::vector<double> delays;
  double d = options_.backoff_base_seconds;
  for (int i = 0; i < options_.retries; ++i) {
    delays.push_back(d);
    d *= options_.backoff_factor;
  }
  return delays;
}

std::string PredictorClient::predict(const std::string& prompt, const OracleFn& oracle) const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  switch (spec_.kind) {
    case PredictorSpec::Kind::Oracle:
      if (!oracle) throw Error(ErrorCode::PredictorUnavailable, "oracle predictor needs a ground-truth bundle (--gt)");
      return oracle(prompt);
    case PredictorSpec::Kind::File:
      try {
        return read_text_file(spec_.target);
      } catch (const Error& e) {
        throw Error(ErrorCode::PredictorUnavailable, e.what());
      }
    case PredictorSpec::Kind::Http:
      return predict_http(prompt);
  }
  return {};
}

namespace {

struct Endpoint {
  std::string origin;
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto host_start = url.find("://");
  const auto path_start = url.find('/', host_start == std::string::npos ? 0 : host_start + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string parse_completion(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("completion") || !j["completion"].is_string())
    throw Error(ErrorCode::MalformedResponse, "response lacks a string 'completion' field");
  return j["completion"].get<std::string>();
}

}  // namespace

std::string PredictorClient::predict_http(const std::string& prompt) const {
  const Endpoint ep = split_url(spec_.target);
  const std::string body = nlohmann::json{{"prompt", prompt}}.dump();
  const auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
  const auto delays = backoff_schedule();

  std::string trace;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delays[attempt - 1]));
    std::string failure;
    {
      const InFlight slot(*gate_);
      httplib::Client client(ep.origin);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      auto res = client.Post(ep.path, body, "application/json");
      if (!res) {
        failure = "transport error: " + httplib::to_string(res.error());
      } else if (res->status != 200) {
        failure = "HTTP " + std::to_string(res->status);
      } else {
        return parse_completion(res->body);
      }
    }
    trace += "\n  attempt " + std::to_string(attempt + 1) + ": " + failure;
    if (attempt < options_.retries) trace += " (retrying in " + format_real(delays[attempt]) + " s)";
  }
  throw Error(ErrorCode::PredictorUnavailable,
              spec_.target + " failed after " + std::to_string(options_.retries + 1) + " attempts:" + trace);
}

}  // namespace artrecon
