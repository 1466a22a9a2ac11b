#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include "xfg/oracle.hpp"

extern char** environ;

namespace xfg {
namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

ProcessOracle::ProcessOracle(const std::string& command, std::string id,
                             std::chrono::milliseconds timeout)
    : id_(std::move(id)), timeout_(timeout) {
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw OracleError("pipe failed: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw OracleError("pipe failed: " + std::string(std::strerror(errno)));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  if (rc != 0) {
    close_fd(to_child_);
    close_fd(from_child_);
    throw OracleError("cannot start oracle \"" + command + "\": " + std::strerror(rc));
  }
  pid_ = pid;
  try {
    protocol::check_handshake(read_line());
  } catch (...) {
    shutdown();
    throw;
  }
}

ProcessOracle::~ProcessOracle() { shutdown(); }

void ProcessOracle::shutdown() {
  close_fd(to_child_);
  close_fd(from_child_);
  if (pid_ <= 0) return;
  // Closing stdin asks a well-behaved child to exit; give it a moment.
  for (int i = 0; i < 50; ++i) {
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  ::kill(pid_, SIGKILL);
  int status = 0;
  ::waitpid(pid_, &status, 0);
  pid_ = -1;
}

void ProcessOracle::write_all(const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      broken_ = true;
      throw OracleError("oracle " + id_ + ": write failed (" + std::strerror(errno) + "), process exited?");
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string ProcessOracle::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      broken_ = true;
      throw OracleError("oracle " + id_ + ": timed out after " + std::to_string(timeout_.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (pr < 0) {
      if (errno == EINTR) continue;
      broken_ = true;
      throw OracleError("oracle " + id_ + ": poll failed");
    }
    if (pr == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      broken_ = true;
      throw OracleError("oracle " + id_ + ": read failed");
    }
    if (n == 0) {
      broken_ = true;
      throw OracleError("oracle " + id_ + ": process exited");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

PredictionRecord ProcessOracle::classify(const GrayImage& img) {
  if (broken_) throw OracleError("oracle " + id_ + ": process is no longer usable");
  if (img.empty()) throw OracleError("classify: empty image");
  const std::uint64_t id = next_id_++;
  write_all(protocol::encode_request(id, img));
  const std::string line = read_line();
  try {
    return protocol::parse_response(line, id);
  } catch (const ProtocolError&) {
    broken_ = true;
    throw;
  }
}

}  // namespace xfg
