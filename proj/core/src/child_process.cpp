#include "child_process.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "wmlab/error.hpp"

namespace wmlab::detail {

ChildProcess::ChildProcess(const std::string& command) : command_(command) {
  if (command.empty()) throw ValidationError("subprocess command is empty");
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw DataError(std::string("cannot create pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw DataError(std::string("cannot create pipe: ") + std::strerror(errno));
  }
  ::signal(SIGPIPE, SIG_IGN);
  const pid_t pid = fork();
  if (pid < 0) throw DataError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = fdopen(in_pipe[1], "w");
  from_child_ = fdopen(out_pipe[0], "r");
}

ChildProcess::~ChildProcess() {
  if (to_child_) std::fclose(to_child_);
  if (from_child_) std::fclose(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

void ChildProcess::send_framed(std::string_view text) {
  std::fprintf(to_child_, "%zu\n", text.size());
  std::fwrite(text.data(), 1, text.size(), to_child_);
  if (std::fflush(to_child_) != 0 || std::ferror(to_child_)) {
    throw DataError("subprocess '" + command_ + "' closed its input");
  }
}

std::string ChildProcess::read_line() {
  char* line = nullptr;
  std::size_t cap = 0;
  const auto got = getline(&line, &cap, from_child_);
  std::string out = got > 0 ? std::string(line, static_cast<std::size_t>(got)) : std::string();
  std::free(line);
  if (got <= 0) throw DataError("subprocess '" + command_ + "' ended without a reply");
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

std::string ChildProcess::read_exact(std::size_t n) {
  std::string out(n, '\0');
  if (n > 0 && std::fread(out.data(), 1, n, from_child_) != n) {
    throw DataError("subprocess '" + command_ + "' sent a truncated reply");
  }
  return out;
}

}  // namespace wmlab::detail
