#pragma once

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "tsmhpo/eval.hpp"

namespace tsmhpo {

/// Runs a black-box objective in a child process and talks the line-delimited
/// protocol over its standard streams:
///
///   child -> parent   {"protocol": "tsm-hpo/1"}                (handshake)
///   parent -> child   {"id": ..., "values": {...},
///                      "budget_fraction": ..., "seed": ...}
///   child -> parent   {"id": ..., "fitness": ...}
///                  or {"id": ..., "error": "..."}
///
/// Exactly one response per request, ids must match. Requests are serialised
/// with a mutex, so one instance can back a multi-worker evaluation pool.
class ProcessEvaluator : public Evaluator {
 public:
  static constexpr const char* kProtocol = "tsm-hpo/1";

  explicit ProcessEvaluator(std::vector<std::string> command)
      : command_(std::move(command)) {
    if (command_.empty())
      throw std::invalid_argument("external evaluator command is empty");
    // Broken-pipe writes must surface as errno, not kill the process.
    ::signal(SIGPIPE, SIG_IGN);
    launch();
    handshake();
  }

  ProcessEvaluator(const ProcessEvaluator&) = delete;
  ProcessEvaluator& operator=(const ProcessEvaluator&) = delete;

  ~ProcessEvaluator() override { shutdown(); }

  EvaluationResult evaluate(const EvaluationRequest& request) override {
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json message = {{"id", request.id},
                              {"values", request.values},
                              {"budget_fraction", request.budget_fraction},
                              {"seed", request.seed}};
    write_line(message.dump(), request.id);

    std::string line;
    if (!read_line(line))
      throw EvaluatorUnavailable(request.id, "evaluator process closed its output");

    nlohmann::json response;
    try {
      response = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponse(request.id,
                              std::string("unparseable response line: ") + e.what());
    }
    if (!response.is_object() || !response.contains("id") ||
        !response["id"].is_string())
      throw MalformedResponse(request.id, "response lacks a string id");
    if (response["id"].get<std::string>() != request.id)
      throw MalformedResponse(request.id,
                              "response carries unknown id '" +
                                  response["id"].get<std::string>() + "'");
    if (response.contains("error"))
      throw EvaluationFailed(request.id, response["error"].is_string()
                                             ? response["error"].get<std::string>()
                                             : response["error"].dump());
    if (!response.contains("fitness") || !response["fitness"].is_number())
      throw MalformedResponse(request.id, "response lacks a numeric fitness");
    return {request.id, response["fitness"].get<double>(),
            request.budget_fraction};
  }

 private:
  void launch() {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
      throw EvaluatorUnavailable("launch", "pipe() failed");

    pid_ = ::fork();
    if (pid_ < 0) throw EvaluatorUnavailable("launch", "fork() failed");

    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> argv;
      argv.reserve(command_.size() + 1);
      for (auto& arg : command_) argv.push_back(arg.data());
      argv.push_back(nullptr);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }

    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  void handshake() {
    std::string line;
    if (!read_line(line))
      throw EvaluatorUnavailable(
          "handshake", "evaluator process exited before the handshake");
    nlohmann::json hello;
    try {
      hello = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw MalformedResponse("handshake", "handshake line is not valid: " + line);
    }
    if (!hello.is_object() || hello.value("protocol", "") != kProtocol)
      throw MalformedResponse("handshake",
                              "expected {\"protocol\": \"" +
                                  std::string(kProtocol) + "\"}, got: " + line);
  }

  void write_line(const std::string& payload, const std::string& id) {
    std::string data = payload + "\n";
    std::size_t written = 0;
    while (written < data.size()) {
      const ssize_t n =
          ::write(write_fd_, data.data() + written, data.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvaluatorUnavailable(id, std::string("write failed: ") +
                                           std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
  }

  bool read_line(std::string& line) {
    for (;;) {
      const std::size_t newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      if (n == 0) return false;  // EOF
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    write_fd_ = read_fd_ = -1;
    if (pid_ > 0) {
      // Give the child a moment to exit on EOF, then escalate.
      for (int attempt = 0; attempt < 50; ++attempt) {
        if (::waitpid(pid_, nullptr, WNOHANG) != 0) {
          pid_ = -1;
          return;
        }
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

  std::vector<std::string> command_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  std::mutex mutex_;
};

}  // namespace tsmhpo
