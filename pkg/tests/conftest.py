import pytest

from fixtures import build_city, build_privacy_fixture, write_city_layers

from trajeval.layers import load_layers


@pytest.fixture(scope="session")
def city():
    return build_city()


@pytest.fixture(scope="session")
def city_layers_dir(tmp_path_factory):
    return write_city_layers(tmp_path_factory.mktemp("layers"))


@pytest.fixture(scope="session")
def city_layers(city_layers_dir):
    return load_layers(city_layers_dir, crs="metric")


@pytest.fixture(scope="session")
def privacy_data():
    return build_privacy_fixture(seed=11)


@pytest.fixture(scope="session")
def privacy_aux():
    return build_privacy_fixture(seed=23, user_prefix="aux")
