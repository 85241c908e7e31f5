#include "delaudit/mock_backend.hpp"

#include <cctype>
#include <chrono>
#include <thread>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::client {

using nlohmann::json;

std::unique_ptr<ChatBackend> make_mock_backend(const std::string& script_path) {
  return MockBackend::from_file(script_path);
}

std::uint64_t prompt_fingerprint(const std::vector<Message>& messages) {
  std::string flat;
  for (const auto& m : messages) {
    flat += m.role;
    flat.push_back('\n');
    flat += m.text;
    flat.push_back('\x1e');
  }
  return util::fnv1a64(flat);
}

namespace {

std::string concat_prompt(const std::vector<Message>& messages) {
  std::string flat;
  for (const auto& m : messages) {
    flat += m.role;
    flat.push_back('\n');
    flat += m.text;
    flat.push_back('\x1e');
  }
  return flat;
}

/// Splits text into chunks of [whitespace-run +] word so that the chunks
/// concatenate back to the exact input.
std::vector<std::string> exact_tokens(const std::string& text) {
  std::vector<std::string> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    toks.push_back(text.substr(start, i - start));
  }
  return toks;
}

}  // namespace

std::unique_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
  json script;
  try {
    script = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw DataError("mock script " + path + ": " + e.what());
  }
  return from_json(script);
}

std::unique_ptr<MockBackend> MockBackend::from_json(const json& script) {
  auto backend_ptr = std::make_unique<MockBackend>();
  MockBackend& backend = *backend_ptr;
  backend.default_behavior_ = script.value("default_behavior", "error");
  if (backend.default_behavior_ != "error" &&
      backend.default_behavior_ != "echo") {
    throw DataError("mock script: default_behavior must be error or echo");
  }
  backend.default_token_logprob_ = script.value("default_token_logprob", -0.1);

  for (const auto& je : script.value("entries", json::array())) {
    Entry entry;
    entry.name = je.value("name", "");
    entry.mode = je.value("mode", "any");
    if (entry.mode != "any" && entry.mode != "greedy" &&
        entry.mode != "sampled") {
      throw DataError("mock script: bad mode " + entry.mode);
    }
    if (je.contains("match")) {
      je.at("match").get_to(entry.match);
    }
    if (je.contains("messages")) {
      std::vector<Message> messages;
      for (const auto& jm : je.at("messages")) {
        messages.push_back(
            Message{jm.at(0).get<std::string>(), jm.at(1).get<std::string>()});
      }
      entry.fingerprint = prompt_fingerprint(messages);
    }
    if (!entry.fingerprint.has_value() && entry.match.empty()) {
      throw DataError("mock script: entry needs \"match\" or \"messages\"");
    }
    for (const auto& jc : je.value("completions", json::array())) {
      ScriptedCompletion sc;
      if (jc.is_string()) {
        sc.text = jc.get<std::string>();
      } else {
        sc.text = jc.value("text", "");
        sc.no_logprobs = jc.value("no_logprobs", false);
        if (jc.contains("token_logprob")) {
          sc.token_logprob = jc.at("token_logprob").get<double>();
          sc.has_token_logprob = true;
        }
        if (jc.contains("logprobs") && !jc.at("logprobs").is_null()) {
          sc.explicit_logprobs = true;
          for (const auto& jt : jc.at("logprobs")) {
            TokenLogprob tl;
            tl.token = jt.at(0).get<std::string>();
            tl.logprob = jt.at(1).get<double>();
            if (jt.size() > 2) {
              for (const auto& ja : jt.at(2)) {
                tl.top_alternatives.emplace_back(ja.at(0).get<std::string>(),
                                                 ja.at(1).get<double>());
              }
            }
            if (tl.logprob > 0.0) {
              throw DataError("mock script: positive logprob for token \"" +
                              tl.token + "\"");
            }
            sc.logprobs.push_back(std::move(tl));
          }
        }
      }
      entry.completions.push_back(std::move(sc));
    }
    entry.error_always = je.value("error_always", false);
    entry.fail_first = je.value("fail_first", 0);
    entry.delay_ms = je.value("delay_ms", 0);
    if (!entry.error_always && entry.completions.empty()) {
      throw DataError("mock script: entry with no completions");
    }
    backend.entries_.push_back(std::move(entry));
  }
  return backend_ptr;
}

MockBackend::Entry* MockBackend::find_entry(const ChatRequest& request) {
  std::uint64_t fp = prompt_fingerprint(request.messages);
  bool greedy = request.sampling.greedy();
  auto mode_ok = [&](const Entry& e) {
    return e.mode == "any" || (greedy ? e.mode == "greedy" : e.mode == "sampled");
  };
  for (auto& e : entries_) {
    if (e.fingerprint.has_value() && *e.fingerprint == fp && mode_ok(e)) {
      return &e;
    }
  }
  std::string flat = concat_prompt(request.messages);
  for (auto& e : entries_) {
    if (e.fingerprint.has_value() || !mode_ok(e)) continue;
    bool all = true;
    for (const auto& needle : e.match) {
      if (flat.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return &e;
  }
  return nullptr;
}

Completion MockBackend::materialize(const Entry& entry,
                                    const ScriptedCompletion& sc,
                                    const ChatRequest& request) const {
  Completion c;
  c.output_text = sc.text;
  if (sc.no_logprobs) {
    c.has_logprobs = false;
    return c;
  }
  if (sc.explicit_logprobs) {
    c.token_logprobs = sc.logprobs;
  } else {
    double lp = sc.has_token_logprob ? sc.token_logprob
                                     : default_token_logprob_;
    for (auto& tok : exact_tokens(sc.text)) {
      TokenLogprob tl;
      tl.token = tok;
      tl.logprob = lp;
      tl.top_alternatives.emplace_back(tl.token, lp);
      c.token_logprobs.push_back(std::move(tl));
    }
  }
  c.has_logprobs = true;
  (void)request;
  return c;
}

std::vector<Completion> MockBackend::complete(const ChatRequest& request) {
  Entry* entry = nullptr;
  int delay_ms = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++total_calls_;
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
    entry = find_entry(request);
    if (entry != nullptr) delay_ms = entry->delay_ms;
  }
  struct InFlightGuard {
    MockBackend* self;
    ~InFlightGuard() {
      std::lock_guard<std::mutex> lock(self->mu_);
      --self->in_flight_;
    }
  } guard{this};

  if (delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
  }

  std::lock_guard<std::mutex> lock(mu_);
  if (entry == nullptr) {
    if (default_behavior_ == "echo") {
      std::string text;
      for (auto it = request.messages.rbegin(); it != request.messages.rend();
           ++it) {
        if (it->role == "user") {
          text = it->text;
          break;
        }
      }
      ScriptedCompletion sc;
      sc.text = text;
      Entry echo_entry;
      std::vector<Completion> out;
      for (int i = 0; i < request.sampling.n; ++i) {
        out.push_back(materialize(echo_entry, sc, request));
      }
      return out;
    }
    throw DataError("mock script has no entry for prompt of item " +
                    request.item_id);
  }

  if (entry->error_always) {
    throw TransportError("mock: scripted permanent failure (" +
                         (entry->name.empty() ? request.item_id : entry->name) +
                         ")");
  }
  if (entry->failures_served < entry->fail_first) {
    ++entry->failures_served;
    throw TransientError("mock: scripted transient failure " +
                         std::to_string(entry->failures_served) + "/" +
                         std::to_string(entry->fail_first));
  }

  std::vector<Completion> out;
  out.reserve(static_cast<std::size_t>(request.sampling.n));
  for (int i = 0; i < request.sampling.n; ++i) {
    const ScriptedCompletion* sc;
    if (request.sampling.greedy()) {
      sc = &entry->completions.front();
    } else {
      sc = &entry->completions[entry->cursor % entry->completions.size()];
      ++entry->cursor;
    }
    out.push_back(materialize(*entry, *sc, request));
  }
  return out;
}

int MockBackend::total_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_calls_;
}

int MockBackend::max_in_flight() const {
  std::lock_guard<std::mutex> lock(mu_);
  return max_in_flight_;
}

}  // namespace delaudit::client
