import setuptools

with open('README.rst', 'r', encoding='utf-8') as fh:
    long_description = fh.read()

with open('VERSION', 'r') as fh:
    version = fh.read().strip()

setuptools.setup(name='sfxflow',
                 version=version,
                 description='Stochastic Maxwell-Bloch simulation of x-ray spontaneous, amplified spontaneous and superfluorescent emission',
                 long_description=long_description,
                 long_description_content_type='text/x-rst',
                 package_dir={'': '.'},
                 packages=setuptools.find_packages(where='.', exclude=['tests', 'examples', 'examples.*']),
                 python_requires='>=3.7',
                 entry_points={'console_scripts': ['sfxflow=sfxflow:main']},
                 scripts=['scripts/run_sfxflow.py'],
                 install_requires=[
                     'numpy',
                     'h5py>=2.10',
                     'PyYAML',
                     'pyyaml-include<2.0',
                     'tqdm',
                     'pytest',
                 ],
                 extras_require={
                     'mpi': ['mpi4py'],
                     'test': ['hypothesis', 'pytest-mpi'],
                 },
                 )
