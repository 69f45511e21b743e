import time

import pytest

from vitalink import credentials as creds
from vitalink import curves, keyfiles
from vitalink.credentials import Role
from vitalink.handshake import LocalIdentity


class Pki:
    """A trust root plus one server and one device identity on one suite."""

    def __init__(self, suite, seed=4242):
        rng = keyfiles.drbg(seed)
        self.suite = suite
        self.now = int(time.time())
        nb, na = self.now - 3600, self.now + 7 * 86400

        self.root_priv, root_pub = curves.keypair_gen(suite, rng)
        self.root_sub = creds.encode_subject("root")
        self.root = creds.credential_issue(
            self.root_priv, self.root_sub, Role.ISSUER, root_pub, nb, na,
            self.root_sub, suite, rng,
        )

        sd, sq = curves.keypair_gen(suite, rng)
        self.server_cred = creds.credential_issue(
            self.root_priv, creds.encode_subject("server-1"), Role.SERVER,
            sq, nb, na, self.root_sub, suite, rng,
        )
        self.server = LocalIdentity(sd, self.server_cred)

        dd, dq = curves.keypair_gen(suite, rng)
        self.device_cred = creds.credential_issue(
            self.root_priv, creds.encode_subject("watch-1"), Role.DEVICE,
            dq, nb, na, self.root_sub, suite, rng,
        )
        self.device = LocalIdentity(dd, self.device_cred)

    def issue_device(self, name, rng):
        dd, dq = curves.keypair_gen(self.suite, rng)
        cred = creds.credential_issue(
            self.root_priv, creds.encode_subject(name), Role.DEVICE, dq,
            self.now - 3600, self.now + 7 * 86400, self.root_sub, self.suite, rng,
        )
        return LocalIdentity(dd, cred)

    def write_files(self, directory):
        suite = self.suite
        keyfiles.write_credential(directory / "root.vlc", self.root, suite)
        keyfiles.write_private_key(directory / "server.vlk", self.server.static_priv, suite)
        keyfiles.write_credential(directory / "server.vlc", self.server_cred, suite)
        keyfiles.write_private_key(directory / "device.vlk", self.device.static_priv, suite)
        keyfiles.write_credential(directory / "device.vlc", self.device_cred, suite)


@pytest.fixture(scope="session")
def pki():
    return Pki(curves.P256)


@pytest.fixture(scope="session")
def toy_pki():
    return Pki(curves.TOY)
