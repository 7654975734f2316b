#pragma once

// httplib configuration shared by every translation unit that includes it.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#endif

#include <httplib.h>
