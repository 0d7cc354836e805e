#pragma once
// Library headers in one include. The runner layer (mobsense/cli/*) also needs OpenSSL and threads.

#include "mobsense/errors.hpp"
#include "mobsense/geometry.hpp"
#include "mobsense/io.hpp"
#include "mobsense/kalman.hpp"
#include "mobsense/linalg.hpp"
#include "mobsense/model.hpp"
#include "mobsense/observability.hpp"
#include "mobsense/planner.hpp"
#include "mobsense/scenarios/gridded.hpp"
#include "mobsense/scenarios/ks.hpp"
#include "mobsense/scenarios/torus.hpp"
